#pragma once

// Candidate refined depth maps, either read from disk or produced by a
// perturbation oracle:
//   C = a * (D + gain * (T - D) + noise) + b,  a = drift_scale + jitter
// where D is the input map, T an optional target (e.g. ground truth), noise is
// seeded, zero-mean and relative to D, and b = drift_offset.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/io/raw.hpp"
#include "gbr/io/scene.hpp"

namespace gbr {

struct DepthOracleParams {
  double detail_gain = 0.0;
  double detail_noise = 0.0;  // relative standard deviation
  double drift_scale = 1.0;
  double drift_scale_jitter = 0.0;
  double drift_offset = 0.0;
  std::uint64_t seed = 0;
};

struct RefinedDepthProvider {
  enum class Source { kDirectory, kOracle };

  Source source = Source::kOracle;
  std::filesystem::path directory;  // holds view_###/*.raw in directory mode
  DepthOracleParams oracle;
  std::vector<DepthMap> targets;    // optional per-view detail targets
  int samples_per_view = 4;

  void validate() const {
    if (samples_per_view < 1) {
      throw ConfigError("RefinedDepthProvider: samples_per_view must be >= 1");
    }
    if (source == Source::kOracle &&
        !(oracle.detail_noise >= 0.0 && oracle.drift_scale_jitter >= 0.0)) {
      throw ConfigError("RefinedDepthProvider: noise parameters must be >= 0");
    }
  }
};

namespace detail {

inline std::vector<DepthMap> read_depth_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("refined depth directory '" + dir.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".raw") files.push_back(e.path());
  }
  if (files.empty()) throw IoError("refined depth directory '" + dir.string() + "' is empty");
  std::sort(files.begin(), files.end());
  std::vector<DepthMap> out;
  for (const auto& f : files) out.push_back(io::load_depth(f));
  return out;
}

}  // namespace detail

/// Candidates for one view. `input` is the map being refined (D0 in the first
/// round, the previous corrected map afterwards).
inline std::vector<DepthMap> sample_refined_depths(const RefinedDepthProvider& provider, int view,
                                                   const DepthMap& input, int round = 0) {
  provider.validate();
  if (provider.source == RefinedDepthProvider::Source::kDirectory) {
    auto maps = detail::read_depth_directory(provider.directory / io::view_dir_name(view));
    for (const auto& m : maps) {
      if (!m.depth.same_shape(input.depth)) {
        throw IoError("refined depth for view " + std::to_string(view) +
                      " has a different resolution than the view");
      }
    }
    return maps;
  }

  const auto& p = provider.oracle;
  const DepthMap* target = nullptr;
  if (view >= 0 && static_cast<std::size_t>(view) < provider.targets.size()) {
    target = &provider.targets[view];
    require_same_shape(target->depth, input.depth, "sample_refined_depths target");
  }
  std::vector<DepthMap> out;
  for (int s = 0; s < provider.samples_per_view; ++s) {
    const std::uint64_t stream =
        p.seed * 0x9E3779B97F4A7C15ull ^ (static_cast<std::uint64_t>(view) << 40) ^
        (static_cast<std::uint64_t>(round) << 20) ^ static_cast<std::uint64_t>(s);
    std::mt19937_64 rng(stream);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double a = p.drift_scale + (p.drift_scale_jitter > 0.0 ? p.drift_scale_jitter * nd(rng) : 0.0);
    DepthMap c(input.width(), input.height());
    for (std::size_t i = 0; i < input.depth.size(); ++i) {
      if (!input.valid[i]) continue;
      const double d = input.depth[i];
      double v = d;
      if (p.detail_gain != 0.0 && target && target->valid[i]) {
        v += p.detail_gain * (target->depth[i] - d);
      }
      if (p.detail_noise > 0.0) v += p.detail_noise * d * nd(rng);
      v = a * v + p.drift_offset;
      if (v > 0.0 && std::isfinite(v)) {
        c.depth[i] = v;
        c.valid[i] = 1;
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace gbr
