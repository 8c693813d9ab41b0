#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "gbr/core/error.hpp"
#include "gbr/core/geometry_types.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/core/rig.hpp"
#include "gbr/geometry/kdtree.hpp"
#include "gbr/geometry/umeyama.hpp"
#include "gbr/loss/ssim.hpp"

namespace gbr {

namespace detail {

/// Distance from each query point to its nearest point of `target`.
inline std::vector<double> nn_distances(const std::vector<Vec3>& query, const std::vector<Vec3>& target) {
  const KdTree tree(target);
  std::vector<double> d(query.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(query.size()); ++i) {
    d[i] = std::sqrt(tree.nearest(query[i]).squared_distance);
  }
  return d;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline void require_nonempty(const std::vector<Vec3>& a, const std::vector<Vec3>& b, const char* who) {
  if (a.empty() || b.empty()) throw EmptyResultError(std::string(who) + ": empty point set");
}

}  // namespace detail

/// 1/2 (mean_a min_b |a - b| + mean_b min_a |a - b|).
inline double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  detail::require_nonempty(a, b, "chamfer");
  return 0.5 * (detail::mean(detail::nn_distances(a, b)) + detail::mean(detail::nn_distances(b, a)));
}

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline F1Score f1_score(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double tau) {
  if (!(tau > 0.0)) throw ConfigError("f1_score: threshold must be > 0");
  detail::require_nonempty(pred, gt, "f1_score");
  auto fraction_within = [tau](const std::vector<double>& d) {
    std::size_t n = 0;
    for (double x : d) n += x <= tau;
    return static_cast<double>(n) / static_cast<double>(d.size());
  };
  F1Score s;
  s.precision = fraction_within(detail::nn_distances(pred, gt));
  s.recall = fraction_within(detail::nn_distances(gt, pred));
  const double pr = s.precision + s.recall;
  s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
  return s;
}

/// RMSE of camera centers after similarity alignment onto the ground truth.
inline double ate(const std::vector<Vec3>& est_centers, const std::vector<Vec3>& gt_centers) {
  if (est_centers.size() != gt_centers.size()) {
    throw std::invalid_argument("ate: trajectories differ in length");
  }
  if (est_centers.size() < 2) throw NumericalError("ate: need at least 2 poses");
  const auto s = umeyama(est_centers, gt_centers, {}, true);
  double sum = 0.0;
  for (std::size_t i = 0; i < est_centers.size(); ++i) {
    sum += (s(est_centers[i]) - gt_centers[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(est_centers.size()));
}

inline double ate(const std::vector<CameraPose>& est, const std::vector<CameraPose>& gt) {
  std::vector<Vec3> a, b;
  for (const auto& p : est) a.push_back(p.center());
  for (const auto& p : gt) b.push_back(p.center());
  return ate(a, b);
}

inline constexpr double kExactMse = 1e-12;

/// 10 log10(1 / MSE); +inf when MSE < 1e-12.
inline double psnr(const RgbImage& a, const RgbImage& b) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) return std::numeric_limits<double>::infinity();
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  const double mse = s.value() / (3.0 * static_cast<double>(a.size()));
  if (mse < kExactMse) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

/// Uniform-area samples of the mesh surface.
inline std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.faces.empty()) throw EmptyResultError("sample_mesh: mesh has no faces");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    total += 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                       .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
                       .norm();
    cdf[i] = total;
  }
  if (!(total > 0.0)) throw NumericalError("sample_mesh: mesh has zero area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double pick = u(rng) * total;
    const std::size_t i = std::min<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), pick) - cdf.begin(), cdf.size() - 1);
    double r1 = u(rng), r2 = u(rng);
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    const auto& f = mesh.faces[i];
    const Vec3& a = mesh.vertices[f[0]];
    out.push_back(a + r1 * (mesh.vertices[f[1]] - a) + r2 * (mesh.vertices[f[2]] - a));
  }
  return out;
}

/// Per point: seen by at least `min_views` cameras, i.e. inside the image and
/// within `tolerance` (relative) of that view's depth map.
inline std::vector<char> visible_mask(const std::vector<Vec3>& pts, const CameraRig& rig,
                                      const std::vector<DepthMap>& depths, int min_views = 2,
                                      double tolerance = 0.01) {
  if (depths.size() != rig.size()) throw std::invalid_argument("visible_mask: one depth map per view");
  std::vector<char> keep(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3& p = pts[i];
    int seen = 0;
    for (std::size_t v = 0; v < rig.size() && seen < min_views; ++v) {
      const Vec3 pc = rig.poses[v].transform(p);
      const auto q = project(p, rig.intrinsics[v], rig.poses[v]);
      if (!q) continue;
      const int x = static_cast<int>(std::lround(q->x())), y = static_cast<int>(std::lround(q->y()));
      if (!depths[v].is_valid(x, y)) continue;
      if (std::abs(depths[v].depth(x, y) - pc.z()) <= tolerance * pc.z()) ++seen;
    }
    keep[i] = seen >= min_views;
  }
  return keep;
}

inline std::vector<Vec3> visible_subset(const std::vector<Vec3>& pts, const CameraRig& rig,
                                        const std::vector<DepthMap>& depths, int min_views = 2,
                                        double tolerance = 0.01) {
  const auto keep = visible_mask(pts, rig, depths, min_views, tolerance);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (keep[i]) out.push_back(pts[i]);
  }
  return out;
}

/// Query points whose nearest reference point is flagged in `keep`. Restricts
/// a prediction to the region of the reference that passed a filter without
/// judging the prediction's own accuracy.
inline std::vector<Vec3> region_subset(const std::vector<Vec3>& query, const std::vector<Vec3>& reference,
                                       const std::vector<char>& keep) {
  if (keep.size() != reference.size()) throw std::invalid_argument("region_subset: one flag per reference point");
  if (reference.empty()) return {};
  const KdTree tree(reference);
  std::vector<Vec3> out;
  for (const auto& q : query) {
    if (keep[tree.nearest(q).index]) out.push_back(q);
  }
  return out;
}

inline double bbox_diagonal(const std::vector<Vec3>& pts) {
  if (pts.empty()) return 0.0;
  Vec3 lo = pts.front(), hi = lo;
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

struct EvalReport {
  std::optional<double> chamfer;
  std::optional<F1Score> f1;
  double f1_threshold = 0.0;
  std::optional<double> ate_rmse;
  std::optional<double> psnr;  // +inf encodes an exact match
  std::optional<double> ssim;

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (chamfer) j["chamfer"] = *chamfer;
    if (f1) {
      j["precision"] = f1->precision;
      j["recall"] = f1->recall;
      j["f1"] = f1->f1;
      j["f1_threshold"] = f1_threshold;
    }
    if (ate_rmse) j["ate_rmse"] = *ate_rmse;
    if (psnr) {
      if (std::isinf(*psnr)) {
        j["psnr"] = "exact";
      } else {
        j["psnr"] = *psnr;
      }
    }
    if (ssim) j["ssim"] = *ssim;
    return j;
  }
};

/// Geometry metrics of `pred` against `gt`; tau <= 0 selects 1% of the
/// ground-truth bounding-box diagonal.
inline EvalReport evaluate_geometry(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                                    double tau = 0.0) {
  EvalReport r;
  r.chamfer = chamfer(pred, gt);
  r.f1_threshold = tau > 0.0 ? tau : 0.01 * bbox_diagonal(gt);
  if (!(r.f1_threshold > 0.0)) throw NumericalError("evaluate_geometry: degenerate ground-truth extent");
  r.f1 = f1_score(pred, gt, r.f1_threshold);
  return r;
}

}  // namespace gbr
