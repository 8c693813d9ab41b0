#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gbr/pipeline/config.hpp"
#include "gbr/pipeline/manifest.hpp"
#include "gbr/pipeline/stages.hpp"

namespace gbr {

struct RunResult {
  int exit_code = 0;
  std::string failed_stage;
  std::string message;
  nlohmann::json manifest;
};

inline std::string remediation_hint(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "check the config file and command-line flags";
    case ErrorKind::kIo: return "check that the scene directory and the outputs of earlier stages exist";
    case ErrorKind::kNumerical: return "inspect the stage report; more views or less noise usually help";
    case ErrorKind::kEmptyResult: return "the inputs produced no usable data; check masks, thresholds and view overlap";
  }
  return "";
}

namespace detail {

inline nlohmann::json load_manifest(const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) {
    try {
      return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception&) {
    }
  }
  return nlohmann::json::object();
}

/// Stage entries kept in execution order, replacing an earlier entry of the
/// same stage.
inline void record_stage(nlohmann::json& manifest, const nlohmann::json& entry) {
  auto& stages = manifest["stages"];
  if (!stages.is_array()) stages = nlohmann::json::array();
  nlohmann::json kept = nlohmann::json::array();
  for (const auto& s : stages) {
    if (s.value("name", "") != entry["name"]) kept.push_back(s);
  }
  kept.push_back(entry);
  const auto& order = known_stages();
  auto rank = [&](const nlohmann::json& s) {
    return std::find(order.begin(), order.end(), s.value("name", "")) - order.begin();
  };
  std::stable_sort(kept.begin(), kept.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
  stages = kept;
}

}  // namespace detail

/// Runs the enabled stages in order. Each stage writes into
/// `<out>/<dir>.partial` and is renamed into place only on success, so a
/// failing stage leaves the outputs of earlier stages untouched. The manifest
/// carries no timestamps; those go to the event log.
inline RunResult run_pipeline(const PipelineConfig& cfg, Workspace ws, const EvalInputs& eval_inputs = {}) {
  namespace fs = std::filesystem;
  RunResult result;
  fs::create_directories(ws.out);
  EventLog log(ws.out / "events.jsonl", cfg.verbosity);
  const auto manifest_path = ws.out / "manifest.json";
  auto manifest = detail::load_manifest(manifest_path);

  auto fail = [&](ErrorKind kind, const std::string& stage, const std::string& what) {
    result.exit_code = exit_code(kind);
    result.failed_stage = stage;
    result.message = what;
    log.emit("error", "stage_failed",
             {{"stage", stage}, {"message", what}, {"hint", remediation_hint(kind)}, {"exit_code", result.exit_code}});
  };

  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(e.kind(), "config", e.what());
    return result;
  }
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif

  const bool synth = std::find(cfg.stages.begin(), cfg.stages.end(), "synth") != cfg.stages.end();
  if (synth) ws.scene = ws.out / "scene";
  const std::string ini = to_ini(cfg);
  write_text(ws.out / "config.ini", ini);
  manifest["tool"] = "gbr";
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.seed;
  manifest["config"] = ini;
  manifest["config_sha256"] = sha256_hex(ini);
  if (!synth && fs::is_directory(ws.scene)) manifest["inputs"] = hash_tree(ws.scene, ws.scene);
  log.emit("info", "run_start", {{"stages", detail::join_list(cfg.stages)}, {"seed", cfg.seed}});

  for (const auto& name : known_stages()) {
    if (std::find(cfg.stages.begin(), cfg.stages.end(), name) == cfg.stages.end()) continue;
    const fs::path final_dir = ws.out / stage_dir_name(name);
    const fs::path partial = ws.out / (stage_dir_name(name) + ".partial");
    fs::remove_all(partial);
    fs::create_directories(partial);
    log.emit("info", "stage_start", {{"stage", name}});
    nlohmann::json entry{{"name", name}};
    try {
      StageContext ctx{cfg, ws, partial, log};
      if (name == "eval") {
        detail::write_json(partial / "eval_report.json", evaluate_outputs(ctx, eval_inputs));
      } else {
        run_stage_body(name, ctx);
      }
      fs::remove_all(final_dir);
      fs::rename(partial, final_dir);
      entry["status"] = "ok";
      entry["outputs"] = hash_tree(final_dir, ws.out);
      log.emit("info", "stage_done", {{"stage", name}});
    } catch (const Error& e) {
      fail(e.kind(), name, e.what());
    } catch (const std::invalid_argument& e) {
      fail(ErrorKind::kConfig, name, e.what());
    } catch (const fs::filesystem_error& e) {
      fail(ErrorKind::kIo, name, e.what());
    }
    if (result.exit_code != 0) {
      fs::remove_all(partial);
      entry["status"] = "failed";
      entry["error"] = result.message;
      entry["exit_code"] = result.exit_code;
    }
    detail::record_stage(manifest, entry);
    manifest["status"] = result.exit_code == 0 ? "ok" : "failed";
    write_text(manifest_path, manifest.dump(2) + "\n");
    if (result.exit_code != 0) break;
  }
  result.manifest = manifest;
  log.emit("info", "run_done", {{"exit_code", result.exit_code}});
  return result;
}

}  // namespace gbr
