#pragma once

#include <string>
#include <vector>

#include "gbr/depth/aggregate.hpp"
#include "gbr/depth/projection.hpp"
#include "gbr/depth/scale_correct.hpp"
#include "gbr/io/depth_provider.hpp"

namespace gbr {

struct DepthRefineConfig {
  ScaleCorrectionConfig scale;
  AggregationConfig aggregation;
  ProjectionOptions projection;
  int rounds = 10;

  void validate() const {
    scale.validate();
    aggregation.validate();
    if (rounds < 1) throw ConfigError("depth refinement: rounds must be >= 1");
  }
};

struct RefineViewResult {
  DepthMap initial;  // D0
  DepthMap depth;    // final D*
  NormalMap normals;
  AggregationResult aggregation;
  std::vector<std::string> warnings;
};

/// Mean of the valid values per pixel.
inline DepthMap mean_depth(const std::vector<DepthMap>& maps) {
  DepthMap out(maps.front().width(), maps.front().height());
  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    double s = 0.0;
    int n = 0;
    for (const auto& m : maps) {
      if (m.valid[i]) {
        s += m.depth[i];
        ++n;
      }
    }
    if (n) {
      out.depth[i] = s / n;
      out.valid[i] = 1;
    }
  }
  return out;
}

/// Refines one view against its projected-cloud depth D0: each round samples
/// candidates from the provider, corrects them against D0 and feeds their
/// mean back as the next round's input; the last round's corrected
/// candidates are aggregated.
inline RefineViewResult refine_view(int view, const DepthMap& d0, const CameraIntrinsics& k,
                                    const RefinedDepthProvider& provider, const DepthRefineConfig& cfg = {}) {
  cfg.validate();
  RefineViewResult res;
  res.initial = d0;
  if (d0.valid_count() == 0) throw EmptyResultError("refine_view: view " + std::to_string(view) + " has no projected depth");
  DepthMap input = d0;
  std::vector<DepthMap> corrected;
  for (int round = 0; round < cfg.rounds; ++round) {
    const auto candidates = sample_refined_depths(provider, view, input, round);
    corrected.clear();
    for (const auto& c : candidates) corrected.push_back(scale_correct(c, d0, cfg.scale));
    input = mean_depth(corrected);
  }
  res.aggregation = aggregate_candidates(corrected, d0, cfg.aggregation);
  res.warnings = res.aggregation.warnings;
  res.depth = res.aggregation.depth;
  res.normals = normals_from_depth(res.depth, k);
  return res;
}

inline RefineViewResult refine_view(int view, const std::vector<Vec3>& cloud, const CameraIntrinsics& k,
                                    const CameraPose& pose, const RefinedDepthProvider& provider,
                                    const DepthRefineConfig& cfg = {}) {
  const auto proj = project_cloud_depth(cloud, k, pose, cfg.projection);
  if (!proj.warning.empty()) throw EmptyResultError(proj.warning + " (view " + std::to_string(view) + ")");
  return refine_view(view, proj.depth, k, provider, cfg);
}

}  // namespace gbr
