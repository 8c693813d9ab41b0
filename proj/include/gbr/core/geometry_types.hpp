#pragma once

#include <array>
#include <vector>

#include "gbr/core/camera.hpp"

namespace gbr {

/// Colors and normals are either empty or parallel to `points`.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;
  std::vector<Vec3> normals;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_colors() const noexcept { return !colors.empty(); }
  bool has_normals() const noexcept { return !normals.empty(); }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;  // per vertex, may be empty
  std::vector<std::array<int, 3>> faces;

  bool empty() const noexcept { return faces.empty(); }

  double area() const {
    double a = 0.0;
    for (const auto& f : faces) {
      a += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
    }
    return a;
  }
};

}  // namespace gbr
