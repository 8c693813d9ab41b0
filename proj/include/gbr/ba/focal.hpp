#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"

namespace gbr {

struct FocalOptions {
  double min_confidence = 0.0;
  int max_iterations = 200;
  double tolerance = 1e-14;
  double ambiguity_threshold = 0.05;  // objective relative to sum C * |offset|
};

struct FocalEstimate {
  double focal = 0.0;
  double objective = 0.0;
  double relative_objective = 0.0;
  int cells = 0;
  int iterations = 0;
  bool ambiguous = false;
};

/// Focal length of a point map expressed in its own camera frame with the
/// principal point at the image center. Minimizes
///   sum C_ij |(i - W/2, j - H/2) - f (P_x, P_y) / P_z|
/// by iteratively reweighted least squares.
inline FocalEstimate estimate_focal(const PointMapFrame& frame, const FocalOptions& opt = {}) {
  const int w = frame.width(), h = frame.height();
  std::vector<Vec2> off, q;
  std::vector<double> c;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double conf = frame.confidence(x, y);
      const Vec3& p = frame.points(x, y);
      if (!(conf > opt.min_confidence) || !p.allFinite() || !(p.z() > 0.0)) continue;
      off.emplace_back(x - 0.5 * w, y - 0.5 * h);
      q.emplace_back(p.x() / p.z(), p.y() / p.z());
      c.push_back(conf);
    }
  }
  FocalEstimate est;
  est.cells = static_cast<int>(c.size());
  if (est.cells < 10) {
    throw NumericalError("estimate_focal: fewer than 10 confident cells in front of the camera");
  }
  auto objective = [&](double f) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * (off[i] - f * q[i]).norm();
    return s;
  };
  double scale = 0.0, qq = 0.0, oq = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    scale += c[i] * off[i].norm();
    qq += c[i] * q[i].squaredNorm();
    oq += c[i] * off[i].dot(q[i]);
  }
  if (!(qq > 1e-18 * std::max(1.0, scale)) || !(oq > 0.0)) {
    throw NumericalError("estimate_focal: degenerate configuration (points on the optical axis)");
  }
  double f = oq / qq;
  const double eta = 1e-12 * std::max(1.0, scale / static_cast<double>(c.size()));
  for (int it = 0; it < opt.max_iterations; ++it) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double r = (off[i] - f * q[i]).norm();
      const double wt = c[i] / std::max(r, eta);
      num += wt * off[i].dot(q[i]);
      den += wt * q[i].squaredNorm();
    }
    if (!(den > 0.0)) break;
    const double next = num / den;
    est.iterations = it + 1;
    const double change = std::abs(next - f);
    f = next;
    if (change <= opt.tolerance * std::abs(f)) break;
  }
  if (!(f > 0.0) || !std::isfinite(f)) {
    throw NumericalError("estimate_focal: no positive focal length fits the point map");
  }
  est.focal = f;
  est.objective = objective(f);
  est.relative_objective = scale > 0.0 ? est.objective / scale : 0.0;
  est.ambiguous = est.relative_objective > opt.ambiguity_threshold;
  return est;
}

}  // namespace gbr
