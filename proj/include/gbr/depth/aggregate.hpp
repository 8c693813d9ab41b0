#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"

namespace gbr {

struct AggregationConfig {
  double tau_d = 0.25;
  int min_accepted = 1;

  void validate() const {
    if (!(tau_d > 0.0)) throw ConfigError("aggregation: tau_D must be > 0");
    if (min_accepted < 0) throw ConfigError("aggregation: min_accepted must be >= 0");
  }
};

struct AggregationResult {
  DepthMap depth;
  std::vector<double> deviation;  // normalized RMS deviation from D0 per candidate
  std::vector<bool> accepted;
  bool fell_back = false;
  std::vector<std::string> warnings;

  std::size_t accepted_count() const {
    return static_cast<std::size_t>(std::count(accepted.begin(), accepted.end(), true));
  }
};

/// RMS difference to D0 over jointly valid pixels, divided by the mean of D0.
inline double normalized_rms_deviation(const DepthMap& c, const DepthMap& d0) {
  require_same_shape(c.depth, d0.depth, "normalized_rms_deviation");
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.depth.size(); ++i) {
    if (!c.valid[i] || !d0.valid[i]) continue;
    sq += (c.depth[i] - d0.depth[i]) * (c.depth[i] - d0.depth[i]);
    ++n;
  }
  const double mean = d0.mean_valid();
  if (n == 0 || !(mean > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(sq / static_cast<double>(n)) / mean;
}

/// Per-pixel mean of the candidates within tau_D of D0. Values at a pixel are
/// accumulated in sorted order so the result does not depend on candidate
/// order, and equal values average to themselves exactly.
inline AggregationResult aggregate_candidates(const std::vector<DepthMap>& candidates, const DepthMap& d0,
                                              const AggregationConfig& cfg = {}) {
  cfg.validate();
  if (candidates.empty()) throw std::invalid_argument("aggregate_candidates: no candidates");
  AggregationResult res;
  std::vector<const DepthMap*> kept;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double dev = normalized_rms_deviation(candidates[c], d0);
    res.deviation.push_back(dev);
    res.accepted.push_back(dev <= cfg.tau_d);
    if (res.accepted.back()) {
      kept.push_back(&candidates[c]);
    } else {
      res.warnings.push_back("candidate " + std::to_string(c) + " rejected: deviation " +
                             std::to_string(dev) + " > tau_D");
    }
  }
  if (static_cast<int>(kept.size()) < cfg.min_accepted) {
    res.depth = d0;
    res.fell_back = true;
    res.warnings.push_back("aggregation: " + std::to_string(kept.size()) +
                           " candidates accepted, falling back to the projected depth");
    return res;
  }
  res.depth = DepthMap(d0.width(), d0.height());
  if (kept.empty()) {
    res.warnings.push_back("aggregation: no candidate accepted");
    return res;
  }
  std::vector<double> vals;
  for (std::size_t i = 0; i < d0.depth.size(); ++i) {
    vals.clear();
    for (const auto* k : kept) {
      if (k->valid[i]) vals.push_back(k->depth[i]);
    }
    if (vals.empty()) continue;
    std::sort(vals.begin(), vals.end());
    double m = 0.0;
    for (std::size_t j = 0; j < vals.size(); ++j) m += (vals[j] - m) / static_cast<double>(j + 1);
    res.depth.depth[i] = m;
    res.depth.valid[i] = 1;
  }
  return res;
}

}  // namespace gbr
