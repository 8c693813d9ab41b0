#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gbr/ba/bundle_adjust.hpp"
#include "gbr/ba/matching.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/geometry/dbscan.hpp"
#include "gbr/geometry/kdtree.hpp"
#include "gbr/geometry/polygon.hpp"
#include "gbr/geometry/umeyama.hpp"

namespace gbr {

/// Union of the first-round tracks and the refined low-confidence tracks.
inline MatchSet merge_second_round(const MatchSet& first, const MatchSet& second) {
  MatchSet out = first;
  out.tracks.insert(out.tracks.end(), second.tracks.begin(), second.tracks.end());
  out.candidate_matches += second.candidate_matches;
  out.filtered_matches += second.filtered_matches;
  out.retained_matches += second.retained_matches;
  return out;
}

/// T minimizing sum |optimized_i - T initial_i|^2; rigid unless `with_scale`.
inline SimilarityTransform rigid_align(const std::vector<Vec3>& initial,
                                       const std::vector<Vec3>& optimized, bool with_scale = false) {
  if (initial.size() != optimized.size()) {
    throw std::invalid_argument("rigid_align: point counts differ");
  }
  if (initial.size() < 3) throw NumericalError("rigid_align: fewer than 3 correspondences");
  return umeyama(initial, optimized, {}, with_scale);
}

inline std::vector<double> alignment_residuals(const SimilarityTransform& t,
                                               const std::vector<Vec3>& initial,
                                               const std::vector<Vec3>& optimized) {
  std::vector<double> d(initial.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (optimized[i] - t(initial[i])).norm();
  return d;
}

/// Per-view scale k_v mapping own-frame points onto the rig's camera frames,
/// fitted by least squares on the track cells of each view.
inline std::vector<double> own_frame_scales(const std::vector<PointMapFrame>& own,
                                            const CameraRig& rig, const MatchSet& tracks) {
  const std::size_t n = own.size();
  std::vector<double> num(n, 0.0), den(n, 0.0);
  for (const auto& t : tracks.tracks) {
    for (const auto& o : t.observations) {
      if (o.cell < 0) continue;
      const Vec3& p = own[o.view].points[o.cell];
      if (!p.allFinite()) continue;
      const Vec3 xc = rig.poses[o.view].transform(t.point);
      num[o.view] += p.dot(xc);
      den[o.view] += p.squaredNorm();
    }
  }
  std::vector<double> k(n, 1.0);
  for (std::size_t v = 0; v < n; ++v) {
    if (den[v] > 0.0 && num[v] > 0.0) {
      k[v] = num[v] / den[v];
    } else {
      throw NumericalError("own_frame_scales: view " + std::to_string(v) +
                           " has no track cells to fix its point-map scale");
    }
  }
  return k;
}

/// Own-frame point maps placed with the rig poses and per-view scales.
inline std::vector<PointMapFrame> reunify_with_rig(const std::vector<PointMapFrame>& own,
                                                   const CameraRig& rig,
                                                   const std::vector<double>& scales) {
  std::vector<PointMapFrame> out = own;
  for (std::size_t v = 0; v < out.size(); ++v) {
    for (auto& p : out[v].points.data()) {
      if (p.allFinite()) p = rig.poses[v].inverse_transform(scales[v] * p);
    }
    out[v].reference_frame = -1;
  }
  return out;
}

/// Masks of the cells already used by `tracks`.
inline std::vector<Mask> track_cells(const MatchSet& tracks, const std::vector<PointMapFrame>& frames) {
  std::vector<Mask> m;
  for (const auto& f : frames) m.emplace_back(f.width(), f.height(), 0);
  for (const auto& t : tracks.tracks) {
    for (const auto& o : t.observations) {
      if (o.cell >= 0) m[o.view][o.cell] = 255;
    }
  }
  return m;
}

inline double median_nn_spacing(const std::vector<Vec3>& pts) {
  if (pts.size() < 2) return 0.0;
  const KdTree tree(pts);
  std::vector<double> d(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d[i] = std::sqrt(tree.nearest(pts[i], static_cast<int>(i)).squared_distance);
  }
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return d[d.size() / 2];
}

/// Linear-interpolated percentile, p in [0, 1].
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct LocalRefineOptions {
  double residual_percentile = 0.95;
  double min_residual = 0.0;  // floor on the residual threshold
  double eps_factor = 3.0;    // DBSCAN eps in units of the median NN spacing
  int min_points = 10;
  double dilation_px = 5.0;
  double primary_threshold = 2.0;
  double secondary_threshold = 0.05;
  double max_patch_error_px = 2.0;  // patch tracks above this after BA are dropped
};

struct LocalRefineResult {
  double threshold = 0.0;
  std::size_t selected = 0;
  int clusters = 0;
  std::vector<int> labels;          // per cloud point, kNoise when not clustered
  std::vector<std::size_t> removed;  // cloud indices replaced by the patches
  std::vector<Mask> regions;
  MatchSet patches;
  std::size_t dropped_patches = 0;
  std::string note;

  bool noop() const noexcept { return clusters == 0; }
};

/// Re-matches and re-triangulates cloud regions whose points moved far from
/// the rigidly aligned initial cloud.
inline LocalRefineResult local_refine(const std::vector<Vec3>& cloud,
                                      const std::vector<double>& residuals,
                                      const std::vector<PointMapFrame>& frames,
                                      const std::vector<Raster<double>>& secondary,
                                      const std::vector<std::pair<int, int>>& pairs,
                                      const CameraRig& rig, const LocalRefineOptions& opt = {}) {
  if (cloud.size() != residuals.size()) {
    throw std::invalid_argument("local_refine: one residual per cloud point required");
  }
  LocalRefineResult res;
  res.labels.assign(cloud.size(), kNoise);
  res.threshold = std::max(percentile(residuals, opt.residual_percentile), opt.min_residual);
  std::vector<std::size_t> sel;
  std::vector<Vec3> sel_pts;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (residuals[i] > res.threshold) {
      sel.push_back(i);
      sel_pts.push_back(cloud[i]);
    }
  }
  res.selected = sel.size();
  if (sel.empty()) {
    res.note = "no points above the residual threshold";
    return res;
  }
  const double eps = opt.eps_factor * median_nn_spacing(cloud);
  const auto lab = dbscan(sel_pts, eps, opt.min_points);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    res.labels[sel[i]] = lab[i];
    res.clusters = std::max(res.clusters, lab[i] + 1);
  }
  if (res.clusters == 0) {
    res.note = "high-residual points form no dense cluster";
    return res;
  }

  for (const auto& f : frames) res.regions.emplace_back(f.width(), f.height(), 0);
  for (int c = 0; c < res.clusters; ++c) {
    for (std::size_t v = 0; v < rig.size(); ++v) {
      std::vector<Vec2> px;
      for (std::size_t i = 0; i < sel.size(); ++i) {
        if (lab[i] != c) continue;
        const auto q = project(sel_pts[i], rig.intrinsics[v], rig.poses[v]);
        if (q && rig.intrinsics[v].contains(*q)) px.push_back(*q);
      }
      if (px.size() < 3) continue;
      rasterize_dilated(convex_hull(px), opt.dilation_px, res.regions[v]);
    }
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (res.labels[i] != kNoise) res.removed.push_back(i);
  }

  MatchOptions mo;
  mo.primary_threshold = opt.primary_threshold;
  mo.secondary_threshold = opt.secondary_threshold;
  mo.cap_per_view = 0;
  mo.regions = &res.regions;
  try {
    res.patches = extract_matches(frames, secondary, pairs, mo);
  } catch (const EmptyResultError&) {
    res.note = "no matches inside the refinement regions";
    return res;
  }
  if (res.patches.size() < 6) {
    res.note = "too few matches inside the refinement regions";
    res.patches.tracks.clear();
    return res;
  }
  CameraRig fixed = rig;
  BAOptions bo;
  bo.mode = BAMode::kPointsOnly;
  bundle_adjust(fixed, res.patches, bo);
  std::vector<Track> kept;
  for (auto& t : res.patches.tracks) {
    double worst = 0.0;
    for (const auto& o : t.observations) {
      const auto q = project(t.point, rig.intrinsics[o.view], rig.poses[o.view]);
      worst = std::max(worst, q ? (*q - o.pixel).norm() : std::numeric_limits<double>::infinity());
    }
    if (worst <= opt.max_patch_error_px) {
      kept.push_back(std::move(t));
    } else {
      ++res.dropped_patches;
    }
  }
  res.patches.tracks = std::move(kept);
  return res;
}

}  // namespace gbr
