#pragma once

#include <vector>

#include "gbr/geometry/nn_grid.hpp"

namespace gbr {

inline constexpr int kNoise = -1;

/// Density clustering. A point is core when at least `min_points` points
/// (itself included) lie within `eps`. Clusters are numbered in order of
/// their lowest-index core point; non-core points join the first cluster that
/// reaches them. Returns one label per point, kNoise for noise.
inline std::vector<int> dbscan(const std::vector<Vec3>& points, double eps, int min_points) {
  const int n = static_cast<int>(points.size());
  std::vector<int> labels(n, kNoise);
  if (n == 0) return labels;
  const NearestNeighborGrid grid(points, eps > 0.0 ? eps : 0.0);
  std::vector<char> visited(n, 0);
  int cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = 1;
    auto seeds = grid.radius(points[i], eps);
    if (static_cast<int>(seeds.size()) < min_points) continue;
    labels[i] = cluster;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const int j = seeds[s];
      if (labels[j] == kNoise) labels[j] = cluster;
      if (visited[j]) continue;
      visited[j] = 1;
      const auto more = grid.radius(points[j], eps);
      if (static_cast<int>(more.size()) >= min_points) {
        seeds.insert(seeds.end(), more.begin(), more.end());
      }
    }
    ++cluster;
  }
  return labels;
}

}  // namespace gbr
