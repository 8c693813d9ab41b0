#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gbr/pipeline/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string scene;
  std::string out = "gbr_out";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string stages;
  std::string verbosity;
  std::string preset;
  std::optional<int> views;
  std::string gt;
  std::string mesh;
  std::string cameras;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--scene", f.scene, "Scene directory (default: <out>/scene)");
  app->add_option("--out", f.out, "Run directory holding all stage outputs")->capture_default_str();
  app->add_option("--config", f.config, "INI config file");
  app->add_option("--seed", f.seed, "Seed for every random choice");
  app->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  app->add_option("--verbosity", f.verbosity, "quiet, info or debug");
}

int execute(const std::string& command, const CommonFlags& f) {
  namespace fs = std::filesystem;
  gbr::PipelineConfig cfg;
  try {
    if (!f.config.empty()) cfg = gbr::load_config(f.config);
  } catch (const gbr::Error& e) {
    std::cerr << "gbr: " << e.what() << '\n';
    return gbr::exit_code(e.kind());
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (!f.verbosity.empty()) cfg.verbosity = f.verbosity;
  if (!f.preset.empty()) cfg.synth.preset = f.preset;
  if (f.views) cfg.synth.spec.views = *f.views;
  if (command == "run") {
    if (!f.stages.empty()) {
      cfg.stages = gbr::detail::split_list(f.stages);
    } else if (f.config.empty() && !f.scene.empty()) {
      cfg.stages.erase(cfg.stages.begin());
    }
  } else {
    cfg.stages = {command};
  }

  gbr::Workspace ws;
  ws.out = f.out;
  ws.scene = f.scene.empty() ? ws.out / "scene" : fs::path(f.scene);
  ws.gt = f.gt;
  gbr::EvalInputs eval;
  eval.mesh = f.mesh;
  eval.cameras = f.cameras;
  const auto result = gbr::run_pipeline(cfg, ws, eval);
  if (result.exit_code != 0) {
    std::cerr << "gbr: stage '" << result.failed_stage << "' failed: " << result.message << '\n';
  } else if (command == "eval") {
    std::cout << gbr::read_file(ws.out / "eval" / "eval_report.json");
  }
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-view surface reconstruction pipeline"};
  app.require_subcommand(1);
  CommonFlags flags;

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"run", "Run the enabled stages in order"},
      {"synth", "Write a synthetic scene with ground truth to <out>/scene"},
      {"align", "Estimate focals and align the point maps into one frame"},
      {"match", "Extract dual-filtered reciprocal matches as tracks"},
      {"ba", "Neural bundle adjustment: cameras, dense cloud, ba_report.json"},
      {"refine-depth", "Scale-consistent refined depth per view"},
      {"render", "Render color, depth and normals from the splatted cloud"},
      {"losses", "Evaluate the supervision losses on real and pseudo views"},
      {"fuse", "TSDF fusion into mesh.ply and volume_meta.json"},
      {"eval", "Compare the outputs with ground truth"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, flags);
    const std::string name = c.name;
    if (name == "run") sub->add_option("--stages", flags.stages, "Comma-separated stage list");
    if (name == "run" || name == "synth") {
      sub->add_option("--preset", flags.preset, "Synthetic preset: sphere, plane or heightfield");
      sub->add_option("--views", flags.views, "Number of synthetic views");
    }
    if (name == "run" || name == "eval" || name == "refine-depth" || name == "ba") {
      sub->add_option("--gt", flags.gt, "Ground-truth directory (default: <scene>/gt)");
    }
    if (name == "eval") {
      sub->add_option("--mesh", flags.mesh, "Mesh to evaluate (default: <out>/fuse/mesh.ply)");
      sub->add_option("--cameras", flags.cameras, "Cameras to evaluate (default: <out>/ba/cameras.txt)");
    }
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return execute(app.get_subcommands().front()->get_name(), flags);
  } catch (const gbr::Error& e) {
    std::cerr << "gbr: " << e.what() << '\n';
    return gbr::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "gbr: " << e.what() << '\n';
    return 1;
  }
}
