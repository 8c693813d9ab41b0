#pragma once

// Full neural bundle adjustment: focal estimation, point-map alignment,
// dual-filtered matching, two BA rounds, rigid alignment of the dense cloud
// and local refinement of misaligned clusters.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gbr/ba/align.hpp"
#include "gbr/ba/bundle_adjust.hpp"
#include "gbr/ba/focal.hpp"
#include "gbr/ba/matching.hpp"
#include "gbr/ba/refine.hpp"
#include "gbr/core/geometry_types.hpp"
#include "gbr/io/scene.hpp"

namespace gbr {

struct NeuralBAOptions {
  AlignmentOptions align;
  FocalOptions focal;
  MatchOptions matching;  // first round: primary 3, secondary 0.05, cap 50000
  BAOptions ba;
  bool second_round = true;
  double second_round_threshold = 2.0;
  bool local_refinement = true;
  LocalRefineOptions local;
  double cloud_confidence = 3.0;  // dense cloud keeps cells at or above
};

struct NeuralBAResult {
  CameraRig rig;
  AlignmentResult alignment;
  std::vector<FocalEstimate> focals;  // empty when intrinsics were given
  MatchSet first_round;                 // X*
  MatchSet second_round;                // X' after points-only BA
  MatchSet tracks;                      // merged tracks, patches included
  BAReport report;
  BAReport second_report;
  SimilarityTransform rigid;            // T: initial cloud -> optimized cloud
  LocalRefineResult local;
  std::vector<double> own_scales;       // own frame -> rig camera frame
  PointCloud cloud;                     // final dense cloud
  std::vector<std::string> notes;
};

namespace detail {

inline Vec3 mean_track_color(const Track& t, const std::vector<SceneView>& views) {
  Vec3 c = Vec3::Zero();
  int n = 0;
  for (const auto& o : t.observations) {
    if (o.cell < 0) continue;
    c += views[o.view].image[o.cell];
    ++n;
  }
  return n ? Vec3(c / n) : t.color;
}

/// Confidence-weighted mean of the member cells in the given frames.
inline Vec3 track_point_in(const Track& t, const std::vector<PointMapFrame>& frames) {
  Vec3 s = Vec3::Zero();
  double w = 0.0;
  for (const auto& o : t.observations) {
    const double c = frames[o.view].confidence[o.cell];
    s += c * frames[o.view].points[o.cell];
    w += c;
  }
  return w > 0.0 ? Vec3(s / w) : t.point;
}

/// Local planes through the k nearest points of a sparse refined patch set.
class PatchSurface {
 public:
  struct Plane {
    Vec3 point, normal;
    double reach;  // distance to the farthest of the k neighbours
  };

  explicit PatchSurface(const std::vector<Vec3>& points, int k = 6) : points_(points), k_(k) {
    if (points_.size() >= 3) tree_ = KdTree(points_);
  }
  PatchSurface(const PatchSurface&) = delete;
  PatchSurface& operator=(const PatchSurface&) = delete;

  bool empty() const noexcept { return points_.size() < 3; }

  Plane plane(const Vec3& q) const {
    const auto hits = tree_.knn(q, std::min<int>(k_, static_cast<int>(points_.size())));
    Vec3 c = Vec3::Zero();
    for (const auto& h : hits) c += points_[h.index];
    c /= static_cast<double>(hits.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& h : hits) {
      const Vec3 d = points_[h.index] - c;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    return {c, es.eigenvectors().col(0), std::sqrt(hits.back().squared_distance)};
  }

  double distance(const Vec3& q) const {
    if (empty()) return std::numeric_limits<double>::infinity();
    const auto pl = plane(q);
    return std::abs((q - pl.point).dot(pl.normal));
  }

  /// Intersection of the ray origin + s dir with the local surface near
  /// `guess`, refined twice; nullopt when the ray grazes the plane or the hit
  /// leaves the neighbourhood of the patch points.
  std::optional<Vec3> snap(const Vec3& origin, const Vec3& dir, Vec3 guess) const {
    if (empty()) return std::nullopt;
    for (int it = 0; it < 3; ++it) {
      const auto pl = plane(guess);
      const double den = dir.dot(pl.normal);
      if (std::abs(den) < 0.2 * dir.norm()) return std::nullopt;
      const double s = (pl.point - origin).dot(pl.normal) / den;
      if (!(s > 0.0)) return std::nullopt;
      guess = origin + s * dir;
      if ((guess - pl.point).norm() > pl.reach) return std::nullopt;
    }
    return guess;
  }

 private:
  std::vector<Vec3> points_;
  int k_;
  KdTree tree_;
};

}  // namespace detail

inline NeuralBAResult neural_bundle_adjust(const SceneBundle& scene, const NeuralBAOptions& opt = {}) {
  scene.validate();
  const int n = static_cast<int>(scene.views.size());
  NeuralBAResult res;

  std::vector<PointMapFrame> own;
  std::vector<Raster<double>> secondary;
  std::vector<RgbImage> images;
  for (const auto& v : scene.views) {
    own.push_back(v.pointmap);
    secondary.push_back(v.match_confidence);
    images.push_back(v.image);
  }

  // Intrinsics.
  if (scene.cameras) {
    res.rig.intrinsics = scene.cameras->intrinsics;
  } else {
    for (int v = 0; v < n; ++v) {
      const auto est = estimate_focal(own[v], opt.focal);
      res.focals.push_back(est);
      if (est.ambiguous) {
        res.notes.push_back("view " + std::to_string(v) + ": focal estimate ambiguous (relative objective " +
                            std::to_string(est.relative_objective) + ")");
      }
      CameraIntrinsics k;
      k.width = own[v].width();
      k.height = own[v].height();
      k.fx = k.fy = est.focal;
      k.cx = 0.5 * k.width;
      k.cy = 0.5 * k.height;
      res.rig.intrinsics.push_back(k);
    }
  }

  // Alignment into one frame.
  res.alignment = pairwise_align(scene, opt.align);
  for (const auto& w : res.alignment.warnings) res.notes.push_back(w);
  for (int v = 0; v < n; ++v) res.rig.poses.push_back(res.alignment.pose(v));
  const auto unified = unify_frames(own, res.alignment.transforms);

  // Round 1.
  res.first_round = extract_matches(unified, secondary, scene.pairs, opt.matching, &images);
  res.report = bundle_adjust(res.rig, res.first_round, opt.ba);
  res.own_scales = own_frame_scales(own, res.rig, res.first_round);
  auto placed = reunify_with_rig(own, res.rig, res.own_scales);

  // Round 2: lower primary threshold, fixed cameras, round-1 cells excluded.
  if (opt.second_round) {
    const auto used = track_cells(res.first_round, own);
    MatchOptions mo = opt.matching;
    mo.primary_threshold = opt.second_round_threshold;
    mo.exclude = &used;
    try {
      res.second_round = extract_matches(placed, secondary, scene.pairs, mo, &images);
    } catch (const EmptyResultError&) {
      res.notes.push_back("second round: no additional matches");
    }
    if (res.second_round.size() >= 6) {
      BAOptions bo = opt.ba;
      bo.mode = BAMode::kPointsOnly;
      CameraRig fixed = res.rig;
      res.second_report = bundle_adjust(fixed, res.second_round, bo);
    } else if (!res.second_round.empty()) {
      res.notes.push_back("second round: fewer than 6 tracks, skipped");
      res.second_round.tracks.clear();
    }
  }
  res.tracks = merge_second_round(res.first_round, res.second_round);

  // Rigid alignment of the initial cloud onto the optimized one.
  std::vector<Vec3> initial, optimized;
  for (const auto& t : res.tracks.tracks) {
    initial.push_back(detail::track_point_in(t, unified));
    optimized.push_back(t.point);
  }
  res.rigid = rigid_align(initial, optimized);
  const auto residuals = alignment_residuals(res.rigid, initial, optimized);

  if (opt.local_refinement) {
    res.local = local_refine(optimized, residuals, placed, secondary, scene.pairs, res.rig, opt.local);
    if (!res.local.note.empty()) res.notes.push_back("local refinement: " + res.local.note);
    if (!res.local.noop()) {
      std::vector<char> drop(res.tracks.size(), 0);
      for (auto i : res.local.removed) drop[i] = 1;
      std::vector<Track> kept;
      for (std::size_t i = 0; i < res.tracks.size(); ++i) {
        if (!drop[i]) kept.push_back(std::move(res.tracks.tracks[i]));
      }
      for (const auto& t : res.local.patches.tracks) kept.push_back(t);
      res.tracks.tracks = std::move(kept);
    }
  }

  for (auto& t : res.tracks.tracks) t.color = detail::mean_track_color(t, scene.views);

  // Dense cloud: T applied to the confident initial cells, plus all tracks.
  // Inside refinement regions, cells off the refined patch surface are moved
  // along their pixel ray onto it.
  std::vector<Vec3> patch_points;
  for (const auto& t : res.local.patches.tracks) patch_points.push_back(t.point);
  const detail::PatchSurface surface(patch_points);
  const auto used = track_cells(res.tracks, own);
  for (int v = 0; v < n; ++v) {
    const auto& f = unified[v];
    for (std::size_t i = 0; i < f.points.size(); ++i) {
      if (!(f.confidence[i] >= opt.cloud_confidence) || !f.points[i].allFinite()) continue;
      if (used[v][i]) continue;
      if (scene.views[v].sky && (*scene.views[v].sky)[i]) continue;
      Vec3 p = res.rigid(f.points[i]);
      if (!res.local.regions.empty() && res.local.regions[v][i] &&
          !(surface.distance(p) <= res.local.threshold)) {
        const Vec2 px(static_cast<double>(i % f.width()), static_cast<double>(i / f.width()));
        const Vec3 c = res.rig.poses[v].center();
        const Vec3 dir = res.rig.poses[v].rotation().transpose() * res.rig.intrinsics[v].ray(px);
        const auto hit = surface.snap(c, dir, p);
        if (!hit) continue;
        p = *hit;
      }
      res.cloud.points.push_back(p);
      res.cloud.colors.push_back(scene.views[v].image[i]);
    }
  }
  for (const auto& t : res.tracks.tracks) {
    res.cloud.points.push_back(t.point);
    res.cloud.colors.push_back(t.color);
  }
  return res;
}

}  // namespace gbr
