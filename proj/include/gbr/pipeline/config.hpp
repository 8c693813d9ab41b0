#pragma once

// Pipeline configuration as an INI file:
//   [pipeline] stages, seed, threads, verbosity
//   [synth] [ba] [refine] [render] [supervision] [fuse] [eval]
// Unknown sections or keys are rejected. `to_ini` writes every effective
// value, which is what the manifest records.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gbr/ba/neural_ba.hpp"
#include "gbr/core/error.hpp"
#include "gbr/depth/refine.hpp"
#include "gbr/io/synthetic.hpp"
#include "gbr/loss/losses.hpp"
#include "gbr/render/splat.hpp"

namespace gbr {

/// Every stage in execution order. `align` and `match` expose the first BA
/// steps on their own and are not part of the default run.
inline const std::vector<std::string>& known_stages() {
  static const std::vector<std::string> s{"synth",  "align",  "match", "ba",  "refine-depth",
                                          "render", "losses", "fuse",  "eval"};
  return s;
}

inline const std::vector<std::string>& default_stages() {
  static const std::vector<std::string> s{"synth", "ba", "refine-depth", "render", "losses", "fuse", "eval"};
  return s;
}

struct SynthConfig {
  std::string preset = "sphere";
  SyntheticSceneSpec spec;
};

struct RefineStageConfig {
  DepthRefineConfig refine;
  DepthOracleParams oracle{0.8, 0.001, 1.4, 0.05, 0.3, 0};  // detail-rich source with scale drift
  int samples = 4;
  bool gt_targets = true;  // oracle detail targets from <scene>/gt when present
  std::filesystem::path directory;  // non-empty selects refined depths from disk
};

struct FuseConfig {
  std::string source = "rendered";  // or "refined"
  double voxel = 0.0;               // 0 selects bbox diagonal / 256
  double truncation_voxels = 5.0;
  double padding = 0.05;            // relative to the cloud bbox diagonal
};

struct EvalConfig {
  double tau = 0.0;  // 0 selects 1% of the ground-truth bbox diagonal
  std::size_t samples = 20000;
  bool visibility = true;
  int min_views = 2;
  double visibility_tolerance = 0.01;
};

struct PipelineConfig {
  std::vector<std::string> stages = default_stages();
  std::uint64_t seed = 0;
  int threads = 0;  // 0 keeps the OpenMP default
  std::string verbosity = "info";
  SynthConfig synth;
  NeuralBAOptions ba;
  RefineStageConfig refine;
  RenderOptions render;
  SplatInitOptions splat_init;
  Vec3 background = Vec3::Zero();
  bool background_from_sky = true;  // mean sky-pixel color when the scene has sky masks
  SupervisionConfig supervision;
  CycleOptions cycle{0.01};
  FuseConfig fuse;
  EvalConfig eval;

  void validate() const;
};

namespace detail {

struct ConfigField {
  std::string key;  // "section.name"
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string join_list(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

inline ConfigField real(const std::string& key, double& v) {
  return {key, [&v, key](const std::string& t) { v = parse_number<double>(key, t); },
          [&v] { return format_double(v); }};
}

template <typename T>
ConfigField integer(const std::string& key, T& v) {
  return {key, [&v, key](const std::string& t) { v = parse_number<T>(key, t); }, [&v] { return std::to_string(v); }};
}

inline ConfigField boolean(const std::string& key, bool& v) {
  return {key, [&v, key](const std::string& t) { v = parse_bool(key, t); }, [&v] { return v ? "true" : "false"; }};
}

inline ConfigField text(const std::string& key, std::string& v) {
  return {key, [&v](const std::string& t) { v = t; }, [&v] { return v; }};
}

inline ConfigField color(const std::string& key, Vec3& v) {
  return {key,
          [&v, key](const std::string& t) {
            const auto parts = split_list(t);
            if (parts.size() != 3) throw ConfigError("config key '" + key + "': expected r,g,b");
            for (int c = 0; c < 3; ++c) v[c] = parse_number<double>(key, parts[c]);
          },
          [&v] { return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]); }};
}

inline std::vector<ConfigField> config_fields(PipelineConfig& c) {
  auto& s = c.synth.spec;
  auto& r = c.refine;
  return {
      {"pipeline.stages", [&c](const std::string& t) { c.stages = split_list(t); }, [&c] { return join_list(c.stages); }},
      integer("pipeline.seed", c.seed),
      integer("pipeline.threads", c.threads),
      text("pipeline.verbosity", c.verbosity),

      text("synth.preset", c.synth.preset),
      integer("synth.views", s.views),
      integer("synth.width", s.width),
      integer("synth.height", s.height),
      real("synth.focal", s.focal),
      real("synth.ring_radius", s.ring_radius),
      real("synth.ring_elevation", s.ring_elevation),
      real("synth.arc_degrees", s.arc_degrees),
      real("synth.pose_jitter", s.pose_jitter),
      real("synth.sigma_px", s.sigma_px),
      real("synth.sigma_3d", s.sigma_3d),
      real("synth.scale_drift", s.scale_drift),
      real("synth.corruption_fraction", s.corruption_fraction),
      real("synth.corruption_offset", s.corruption_offset),
      integer("synth.bumps", s.bumps),
      real("synth.confidence_gain", s.confidence_gain),

      real("ba.primary_threshold", c.ba.matching.primary_threshold),
      real("ba.secondary_threshold", c.ba.matching.secondary_threshold),
      integer("ba.cap_per_view", c.ba.matching.cap_per_view),
      real("ba.huber_delta", c.ba.ba.huber_delta),
      integer("ba.max_iterations", c.ba.ba.max_iterations),
      boolean("ba.second_round", c.ba.second_round),
      real("ba.second_round_threshold", c.ba.second_round_threshold),
      boolean("ba.local_refinement", c.ba.local_refinement),
      real("ba.cloud_confidence", c.ba.cloud_confidence),

      integer("refine.window", r.refine.scale.window),
      integer("refine.stride", r.refine.scale.stride),
      real("refine.eps_edge", r.refine.scale.eps_edge),
      real("refine.eps_smooth", r.refine.scale.eps_smooth),
      real("refine.tau_e", r.refine.scale.tau_e),
      real("refine.tau_d", r.refine.aggregation.tau_d),
      integer("refine.rounds", r.refine.rounds),
      real("refine.front_tolerance", r.refine.projection.front_tolerance),
      integer("refine.samples", r.samples),
      real("refine.detail_gain", r.oracle.detail_gain),
      real("refine.detail_noise", r.oracle.detail_noise),
      real("refine.drift_scale", r.oracle.drift_scale),
      real("refine.drift_scale_jitter", r.oracle.drift_scale_jitter),
      real("refine.drift_offset", r.oracle.drift_offset),
      boolean("refine.gt_targets", r.gt_targets),
      {"refine.directory", [&r](const std::string& t) { r.directory = t; }, [&r] { return r.directory.string(); }},

      real("render.covariance_floor", c.render.covariance_floor),
      real("render.transmittance_cutoff", c.render.transmittance_cutoff),
      real("render.alpha_min", c.render.alpha_min),
      real("render.near", c.render.near),
      real("render.valid_alpha", c.render.valid_alpha),
      integer("render.neighbors", c.splat_init.neighbors),
      real("render.scale_factor", c.splat_init.scale_factor),
      real("render.thickness", c.splat_init.thickness),
      real("render.opacity", c.splat_init.opacity),
      color("render.background", c.background),
      boolean("render.background_from_sky", c.background_from_sky),

      real("supervision.beta", c.supervision.beta),
      integer("supervision.normal_window", c.supervision.normal_window),
      integer("supervision.pseudo_views", c.supervision.pseudo_view_count),
      real("supervision.pseudo_epsilon", c.supervision.pseudo_epsilon),
      real("supervision.pseudo_weight", c.supervision.pseudo_weight),
      real("supervision.lambda_pho", c.supervision.lambda_pho),
      real("supervision.lambda1", c.supervision.lambda1),
      real("supervision.lambda2", c.supervision.lambda2),
      real("supervision.lambda3", c.supervision.lambda3),
      real("supervision.lambda4", c.supervision.lambda4),
      real("supervision.occlusion_tolerance", c.cycle.occlusion_tolerance),

      text("fuse.source", c.fuse.source),
      real("fuse.voxel", c.fuse.voxel),
      real("fuse.truncation_voxels", c.fuse.truncation_voxels),
      real("fuse.padding", c.fuse.padding),

      real("eval.tau", c.eval.tau),
      integer("eval.samples", c.eval.samples),
      boolean("eval.visibility", c.eval.visibility),
      integer("eval.min_views", c.eval.min_views),
      real("eval.visibility_tolerance", c.eval.visibility_tolerance),
  };
}

inline SurfaceKind preset_surface(const std::string& preset) {
  if (preset == "sphere") return SurfaceKind::kSphere;
  if (preset == "plane") return SurfaceKind::kPlane;
  if (preset == "heightfield") return SurfaceKind::kHeightfield;
  throw ConfigError("unknown synthetic preset '" + preset + "' (expected sphere, plane or heightfield)");
}

}  // namespace detail

inline void PipelineConfig::validate() const {
  for (const auto& s : stages) {
    if (std::find(known_stages().begin(), known_stages().end(), s) == known_stages().end()) {
      throw ConfigError("unknown stage '" + s + "' (expected one of " + detail::join_list(known_stages()) + ")");
    }
  }
  if (threads < 0) throw ConfigError("pipeline.threads must be >= 0");
  if (verbosity != "quiet" && verbosity != "info" && verbosity != "debug") {
    throw ConfigError("pipeline.verbosity must be quiet, info or debug");
  }
  detail::preset_surface(synth.preset);
  try {
    synth.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  refine.refine.validate();
  if (refine.samples < 1) throw ConfigError("refine.samples must be >= 1");
  render.validate();
  if (splat_init.neighbors < 3) throw ConfigError("render.neighbors must be >= 3");
  supervision.validate();
  if (!(cycle.occlusion_tolerance >= 0.0)) throw ConfigError("supervision.occlusion_tolerance must be >= 0");
  if (fuse.source != "rendered" && fuse.source != "refined") {
    throw ConfigError("fuse.source must be 'rendered' or 'refined'");
  }
  if (!(fuse.voxel >= 0.0)) throw ConfigError("fuse.voxel must be >= 0");
  if (!(fuse.truncation_voxels >= 2.0)) throw ConfigError("fuse.truncation_voxels must be >= 2");
  if (!(fuse.padding >= 0.0)) throw ConfigError("fuse.padding must be >= 0");
  if (!(eval.tau >= 0.0)) throw ConfigError("eval.tau must be >= 0");
  if (eval.samples < 1) throw ConfigError("eval.samples must be >= 1");
  if (eval.min_views < 1) throw ConfigError("eval.min_views must be >= 1");
}

/// Applies "section.key" = value overrides to `cfg`.
inline void apply_config(PipelineConfig& cfg, const boost::property_tree::ptree& tree) {
  auto fields = detail::config_fields(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.key == full; });
      if (it == fields.end()) throw ConfigError("config: unknown key '" + full + "'");
      it->set(value.get_value<std::string>());
    }
  }
  cfg.synth.spec.surface = detail::preset_surface(cfg.synth.preset);
}

inline PipelineConfig parse_config(const std::string& ini_text) {
  boost::property_tree::ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  apply_config(cfg, tree);
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string to_ini(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  std::string out, section;
  for (const auto& f : detail::config_fields(copy)) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += f.key.substr(dot + 1) + " = " + f.get() + "\n";
  }
  return out;
}

}  // namespace gbr
