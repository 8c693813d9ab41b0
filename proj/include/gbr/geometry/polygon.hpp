#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gbr/core/camera.hpp"
#include "gbr/core/raster.hpp"

namespace gbr {

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

/// Marks pixels inside the convex polygon or within `dilation` pixels of it.
inline void rasterize_dilated(const std::vector<Vec2>& hull, double dilation, Mask& mask) {
  if (hull.empty()) return;
  Vec2 lo = hull.front(), hi = hull.front();
  for (const auto& p : hull) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(lo.x() - dilation)));
  const int y0 = std::max(0, static_cast<int>(std::floor(lo.y() - dilation)));
  const int x1 = std::min(mask.width() - 1, static_cast<int>(std::ceil(hi.x() + dilation)));
  const int y1 = std::min(mask.height() - 1, static_cast<int>(std::ceil(hi.y() + dilation)));
  const std::size_t n = hull.size();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x, y);
      bool inside = n >= 3;
      double dist = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % n];
        if (n >= 3 && (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x()) < 0.0) {
          inside = false;
        }
        dist = std::min(dist, point_segment_distance(p, a, b));
      }
      if (inside || dist <= dilation) mask(x, y) = 1;
    }
  }
}

}  // namespace gbr
