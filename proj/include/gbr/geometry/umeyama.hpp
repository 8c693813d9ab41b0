#pragma once

#include <Eigen/SVD>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "gbr/core/camera.hpp"
#include "gbr/core/error.hpp"

namespace gbr {

/// Weighted least-squares similarity (or rigid, when with_scale is false)
/// mapping `src` onto `dst`: argmin sum_i w_i |dst_i - (s R src_i + t)|^2.
/// An empty weight span means unit weights. Rows with zero weight are ignored.
inline SimilarityTransform umeyama(std::span<const Vec3> src, std::span<const Vec3> dst,
                                   std::span<const double> weights = {}, bool with_scale = true) {
  if (src.size() != dst.size() || (!weights.empty() && weights.size() != src.size())) {
    throw std::invalid_argument("umeyama: input sizes differ");
  }
  auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double wsum = 0.0;
  std::size_t used = 0;
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double w = weight(i);
    if (!(w > 0.0)) continue;
    if (!src[i].allFinite() || !dst[i].allFinite()) continue;
    wsum += w;
    mu_s += w * src[i];
    mu_d += w * dst[i];
    ++used;
  }
  if (used < 3) throw NumericalError("umeyama: fewer than 3 weighted correspondences");
  mu_s /= wsum;
  mu_d /= wsum;
  Mat3 cov = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double w = weight(i);
    if (!(w > 0.0) || !src[i].allFinite() || !dst[i].allFinite()) continue;
    const Vec3 a = src[i] - mu_s;
    const Vec3 b = dst[i] - mu_d;
    cov += w * b * a.transpose();
    var_s += w * a.squaredNorm();
  }
  cov /= wsum;
  var_s /= wsum;
  if (!(var_s > 0.0)) throw NumericalError("umeyama: source points are coincident");
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[1] > 1e-14 * std::max(1.0, sv[0]))) {
    throw NumericalError("umeyama: correspondences are collinear");
  }
  Vec3 d = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d[2] = -1.0;
  const Mat3 r = orthonormalize(svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose());
  const double s = with_scale ? sv.dot(d) / var_s : 1.0;
  const Vec3 t = mu_d - s * (r * mu_s);
  return {s, r, t};
}

inline SimilarityTransform umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                                   const std::vector<double>& weights = {},
                                   bool with_scale = true) {
  return umeyama(std::span<const Vec3>(src), std::span<const Vec3>(dst),
                 std::span<const double>(weights), with_scale);
}

}  // namespace gbr
