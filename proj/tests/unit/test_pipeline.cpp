#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "gbr/pipeline/pipeline.hpp"

#ifndef _WIN32
#include <sys/wait.h>
#endif

using namespace gbr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gbr_test_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

PipelineConfig quiet_config() {
  PipelineConfig cfg;
  cfg.seed = 3;
  cfg.verbosity = "quiet";
  return cfg;
}

const nlohmann::json* find_stage(const nlohmann::json& manifest, const std::string& name) {
  for (const auto& s : manifest.at("stages")) {
    if (s.at("name") == name) return &s;
  }
  return nullptr;
}

}  // namespace

TEST(Config, ParsesSectionsAndLists) {
  const auto cfg = parse_config(
      "[pipeline]\nstages = synth, ba\nseed = 42\n"
      "[synth]\npreset = heightfield\nviews = 9\n"
      "[fuse]\nsource = refined\nvoxel = 0.01\n");
  EXPECT_EQ(cfg.stages, (std::vector<std::string>{"synth", "ba"}));
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.synth.preset, "heightfield");
  EXPECT_EQ(cfg.synth.spec.views, 9);
  EXPECT_EQ(cfg.fuse.source, "refined");
  EXPECT_EQ(cfg.fuse.voxel, 0.01);
}

TEST(Config, EffectiveIniRoundTrips) {
  auto cfg = parse_config("[supervision]\nlambda3 = 0.125\n[eval]\nsamples = 777\n");
  const auto ini = to_ini(cfg);
  EXPECT_EQ(to_ini(parse_config(ini)), ini);
  EXPECT_EQ(parse_config(ini).supervision.lambda3, 0.125);
  EXPECT_EQ(parse_config(ini).eval.samples, 777u);
}

TEST(Config, UnknownKeyIsConfigError) {
  EXPECT_THROW(parse_config("[render]\nno_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[nowhere]\nseed = 1\n"), ConfigError);
}

TEST(Config, InvalidValuesAreRejected) {
  auto cfg = quiet_config();
  cfg.stages = {"synth", "paint"};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = quiet_config();
  cfg.fuse.source = "splats";
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_config("[pipeline]\nseed = many\n"), ConfigError);
}

TEST(Pipeline, InvalidConfigExitsTwoWithoutRunning) {
  const auto out = fresh_dir("invalid");
  auto cfg = quiet_config();
  cfg.verbosity = "loud";
  const auto res = run_pipeline(cfg, Workspace{{}, out, {}});
  EXPECT_EQ(res.exit_code, 2);
  EXPECT_FALSE(fs::exists(out / "scene"));
}

TEST(Pipeline, DeterministicManifestAndOutputs) {
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  const auto cfg = quiet_config();
  const auto ra = run_pipeline(cfg, Workspace{{}, a, {}});
  const auto rb = run_pipeline(cfg, Workspace{{}, b, {}});
  ASSERT_EQ(ra.exit_code, 0) << ra.message;
  ASSERT_EQ(rb.exit_code, 0) << rb.message;
  EXPECT_EQ(read_file(a / "manifest.json"), read_file(b / "manifest.json"));
  for (const auto& stage : known_stages()) {
    const auto* s = find_stage(ra.manifest, stage);
    if (stage == "align" || stage == "match") {
      EXPECT_EQ(s, nullptr);
    } else {
      ASSERT_NE(s, nullptr) << stage;
      EXPECT_EQ(s->at("status"), "ok") << stage;
    }
  }
  const auto report = nlohmann::json::parse(read_file(a / "eval" / "eval_report.json"));
  EXPECT_LT(report.at("chamfer_voxels").get<double>(), 2.0);
  EXPECT_TRUE(fs::exists(a / "events.jsonl"));
  EXPECT_FALSE(fs::exists(a / "ba.partial"));
}

TEST(Pipeline, ManifestHashesMatchFiles) {
  const auto out = fresh_dir("hashes");
  auto cfg = quiet_config();
  cfg.stages = {"synth", "ba"};
  const auto res = run_pipeline(cfg, Workspace{{}, out, {}});
  ASSERT_EQ(res.exit_code, 0) << res.message;
  const auto* ba = find_stage(res.manifest, "ba");
  ASSERT_NE(ba, nullptr);
  ASSERT_FALSE(ba->at("outputs").empty());
  for (const auto& o : ba->at("outputs")) {
    const auto bytes = read_file(out / o.at("path").get<std::string>());
    EXPECT_EQ(o.at("sha256").get<std::string>(), sha256_hex(bytes));
    EXPECT_EQ(o.at("bytes").get<std::size_t>(), bytes.size());
  }
  EXPECT_TRUE(fs::exists(out / "ba" / "cameras.txt"));
  EXPECT_TRUE(fs::exists(out / "ba" / "cloud.ply"));
  EXPECT_TRUE(nlohmann::json::parse(read_file(out / "ba" / "ba_report.json")).contains("final_rmse_px"));
}

TEST(Pipeline, FailedStageKeepsEarlierOutputs) {
  const auto out = fresh_dir("missing_pairs");
  auto cfg = quiet_config();
  cfg.stages = {"synth"};
  ASSERT_EQ(run_pipeline(cfg, Workspace{{}, out, {}}).exit_code, 0);
  fs::remove(out / "scene" / "pairs.txt");
  cfg.stages = {"ba"};
  const auto res = run_pipeline(cfg, Workspace{out / "scene", out, {}});
  EXPECT_EQ(res.exit_code, 3);
  EXPECT_EQ(res.failed_stage, "ba");
  EXPECT_EQ(find_stage(res.manifest, "synth")->at("status"), "ok");
  EXPECT_EQ(find_stage(res.manifest, "ba")->at("status"), "failed");
  EXPECT_EQ(find_stage(res.manifest, "ba")->at("exit_code"), 3);
  EXPECT_TRUE(fs::exists(out / "scene" / "gt" / "cameras.txt"));
  EXPECT_FALSE(fs::exists(out / "ba"));
  EXPECT_FALSE(fs::exists(out / "ba.partial"));
}

TEST(Pipeline, MissingUpstreamOutputIsIoError) {
  const auto out = fresh_dir("no_ba");
  auto cfg = quiet_config();
  cfg.stages = {"synth"};
  ASSERT_EQ(run_pipeline(cfg, Workspace{{}, out, {}}).exit_code, 0);
  cfg.stages = {"fuse"};
  const auto res = run_pipeline(cfg, Workspace{out / "scene", out, {}});
  EXPECT_EQ(res.exit_code, 3);
  EXPECT_NE(res.message.find("ba"), std::string::npos);
}

TEST(Pipeline, GroundTruthAgainstItselfScoresZero) {
  const auto out = fresh_dir("gt_self");
  auto cfg = quiet_config();
  cfg.stages = {"synth"};
  ASSERT_EQ(run_pipeline(cfg, Workspace{{}, out, {}}).exit_code, 0);
  cfg.stages = {"eval"};
  const auto gt = out / "scene" / "gt";
  const auto res = run_pipeline(cfg, Workspace{out / "scene", out, {}}, EvalInputs{gt / "mesh.ply", gt / "cameras.txt"});
  ASSERT_EQ(res.exit_code, 0) << res.message;
  const auto report = nlohmann::json::parse(read_file(out / "eval" / "eval_report.json"));
  EXPECT_LE(report.at("chamfer").get<double>(), 1e-12);
  EXPECT_LE(report.at("ate_rmse").get<double>(), 1e-12);
  EXPECT_EQ(report.at("f1").get<double>(), 1.0);
}

#ifndef _WIN32
TEST(Cli, ExitCodesFollowErrorKinds) {
  const char* cli = std::getenv("GBR_CLI");
  if (!cli) GTEST_SKIP() << "GBR_CLI not set";
  const auto dir = fresh_dir("cli");
  fs::create_directories(dir);
  write_text(dir / "bad.ini", "[render]\nno_such_key = 1\n");
  auto run = [&](const std::string& args) {
    const int status = std::system((std::string(cli) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  EXPECT_EQ(run("run --config " + (dir / "bad.ini").string() + " --out " + (dir / "o1").string()), 2);
  EXPECT_EQ(run("ba --scene " + (dir / "nowhere").string() + " --out " + (dir / "o2").string()), 3);
  EXPECT_EQ(run("synth --views 5 --verbosity quiet --out " + (dir / "o3").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "o3" / "scene" / "view_004"));
}
#endif
