#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"

namespace gbr {

struct ProjectionOptions {
  double front_tolerance = 0.01;  // relative depth band of the visible layer
  bool fill_holes = false;
  double fill_radius = 3.0;  // px
  int fill_min_neighbors = 4;
};

struct ProjectedDepth {
  DepthMap depth;
  Mask filled;  // pixels set by hole filling
  std::size_t hits = 0;
  std::string warning;
};

/// Z-buffered splat of a point cloud into nearest pixels. Points within
/// `front_tolerance` (relative) of a pixel's minimum depth form its visible
/// front layer; the one projecting closest to the pixel center sets the depth.
inline ProjectedDepth project_cloud_depth(const std::vector<Vec3>& cloud, const CameraIntrinsics& k,
                                          const CameraPose& pose, const ProjectionOptions& opt = {}) {
  if (cloud.empty()) throw EmptyResultError("project_cloud_depth: empty point cloud");
  k.validate();
  ProjectedDepth out;
  out.depth = DepthMap(k.width, k.height);
  out.filled = Mask(k.width, k.height, 0);
  struct Sample {
    double z, offset2;
  };
  std::vector<std::vector<Sample>> bins(static_cast<std::size_t>(k.width) * k.height);
  for (const auto& p : cloud) {
    if (!p.allFinite()) continue;
    const Vec3 pc = pose.transform(p);
    if (!(pc.z() > kMinCameraDepth)) continue;
    const double u = k.fx * pc.x() / pc.z() + k.cx, v = k.fy * pc.y() / pc.z() + k.cy;
    const long x = std::lround(u), y = std::lround(v);
    if (x < 0 || y < 0 || x >= k.width || y >= k.height) continue;
    bins[out.depth.depth.index(static_cast<int>(x), static_cast<int>(y))].push_back(
        {pc.z(), (u - x) * (u - x) + (v - y) * (v - y)});
    ++out.hits;
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto& b = bins[i];
    if (b.empty()) continue;
    double zmin = b.front().z;
    for (const auto& s : b) zmin = std::min(zmin, s.z);
    const double limit = zmin * (1.0 + opt.front_tolerance);
    const Sample* best = nullptr;
    for (const auto& s : b) {
      if (s.z > limit) continue;
      if (!best || s.offset2 < best->offset2 || (s.offset2 == best->offset2 && s.z < best->z)) best = &s;
    }
    out.depth.depth[i] = best->z;
    out.depth.valid[i] = 1;
  }
  if (out.hits == 0) {
    out.warning = "project_cloud_depth: no point of the cloud is visible in this view";
    return out;
  }
  if (opt.fill_holes) {
    const DepthMap src = out.depth;
    const int r = static_cast<int>(std::floor(opt.fill_radius));
    std::vector<double> vals;
    for (int y = 0; y < k.height; ++y) {
      for (int x = 0; x < k.width; ++x) {
        if (src.is_valid(x, y)) continue;
        vals.clear();
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            if (dx * dx + dy * dy > opt.fill_radius * opt.fill_radius) continue;
            if (src.is_valid(x + dx, y + dy)) vals.push_back(src.depth(x + dx, y + dy));
          }
        }
        if (static_cast<int>(vals.size()) < std::max(1, opt.fill_min_neighbors)) continue;
        const std::size_t m = vals.size() / 2;
        std::nth_element(vals.begin(), vals.begin() + m, vals.end());
        double med = vals[m];
        if (vals.size() % 2 == 0) {
          med = 0.5 * (med + *std::max_element(vals.begin(), vals.begin() + m));
        }
        out.depth.set(x, y, med);
        out.filled(x, y) = 1;
      }
    }
  }
  return out;
}

}  // namespace gbr
