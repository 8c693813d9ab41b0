#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gbr/core/camera.hpp"
#include "gbr/core/raster.hpp"

namespace gbr {

using RgbImage = Raster<Vec3>;

/// Per-view raster of 3D points with confidences. `reference_frame` names
/// the view whose camera frame the points are expressed in.
struct PointMapFrame {
  Raster<Vec3> points;
  Raster<double> confidence;
  int frame_id = 0;
  int reference_frame = 0;

  int width() const noexcept { return points.width(); }
  int height() const noexcept { return points.height(); }

  /// Enforces the invariants in place: confidence >= 0 everywhere and zero on
  /// non-finite points.
  void sanitize() {
    require_same_shape(points, confidence, "PointMapFrame");
    for (std::size_t i = 0; i < points.size(); ++i) {
      double& c = confidence[i];
      if (!std::isfinite(c) || c < 0.0) c = 0.0;
      if (!points[i].allFinite()) c = 0.0;
    }
  }

  void validate() const {
    require_same_shape(points, confidence, "PointMapFrame");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!(confidence[i] >= 0.0)) {
        throw std::invalid_argument("PointMapFrame: negative confidence");
      }
      if (!points[i].allFinite() && confidence[i] != 0.0) {
        throw std::invalid_argument("PointMapFrame: non-finite point with nonzero confidence");
      }
    }
  }
};

/// Camera-frame z-depth raster with explicit validity.
struct DepthMap {
  Raster<double> depth;
  Mask valid;

  DepthMap() = default;
  DepthMap(int width, int height) : depth(width, height, 0.0), valid(width, height, 0) {}

  int width() const noexcept { return depth.width(); }
  int height() const noexcept { return depth.height(); }
  bool is_valid(int x, int y) const { return valid.in_bounds(x, y) && valid(x, y) != 0; }

  void set(int x, int y, double d) {
    depth(x, y) = d;
    valid(x, y) = 1;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.data()) n += v != 0;
    return n;
  }

  double mean_valid() const {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
      if (valid[i]) {
        s += depth[i];
        ++n;
      }
    }
    return n ? s / static_cast<double>(n) : 0.0;
  }

  void validate() const {
    require_same_shape(depth, valid, "DepthMap");
    for (std::size_t i = 0; i < depth.size(); ++i) {
      if (valid[i] && !(depth[i] > 0.0 && std::isfinite(depth[i]))) {
        throw std::invalid_argument("DepthMap: non-positive depth on a valid pixel");
      }
    }
  }

  /// Wraps a plain raster; positive finite entries become valid.
  static DepthMap from_raster(const Raster<double>& values) {
    DepthMap out(values.width(), values.height());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (std::isfinite(values[i]) && values[i] > 0.0) {
        out.depth[i] = values[i];
        out.valid[i] = 1;
      }
    }
    return out;
  }
};

/// Unit normals expressed in the camera frame of the view, oriented toward
/// the camera (n . viewing ray < 0).
struct NormalMap {
  Raster<Vec3> normals;
  Mask valid;

  NormalMap() = default;
  NormalMap(int width, int height)
      : normals(width, height, Vec3::Zero()), valid(width, height, 0) {}

  int width() const noexcept { return normals.width(); }
  int height() const noexcept { return normals.height(); }
  bool is_valid(int x, int y) const { return valid.in_bounds(x, y) && valid(x, y) != 0; }
};

/// Normals from a depth map using the up/down/left/right neighbors of each
/// pixel: n = normalize((p_down - p_up) x (p_right - p_left)), flipped to
/// face the camera. Border pixels and pixels touching invalid depth are
/// invalid, as are pixels whose cross product degenerates.
inline NormalMap normals_from_depth(const DepthMap& depth, const CameraIntrinsics& k) {
  const int w = depth.width();
  const int h = depth.height();
  NormalMap out(w, h);
  auto point = [&](int x, int y) {
    return unproject_camera(Vec2(x, y), depth.depth(x, y), k);
  };
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (!depth.is_valid(x, y) || !depth.is_valid(x, y - 1) || !depth.is_valid(x, y + 1) ||
          !depth.is_valid(x - 1, y) || !depth.is_valid(x + 1, y)) {
        continue;
      }
      const Vec3 vertical = point(x, y + 1) - point(x, y - 1);
      const Vec3 horizontal = point(x + 1, y) - point(x - 1, y);
      Vec3 n = vertical.cross(horizontal);
      const double len = n.norm();
      if (!(len >= 1e-12)) continue;
      n /= len;
      if (n.dot(point(x, y)) > 0.0) n = -n;
      out.normals(x, y) = n;
      out.valid(x, y) = 1;
    }
  }
  return out;
}

inline Vec3 nan_vec3() {
  const double q = std::numeric_limits<double>::quiet_NaN();
  return {q, q, q};
}

}  // namespace gbr
