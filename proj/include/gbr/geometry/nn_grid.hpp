#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gbr/core/camera.hpp"

namespace gbr {

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Exact nearest-neighbour index over a uniform voxel grid. Queries visit
/// cells in Chebyshev rings around the query cell and stop once no unvisited
/// cell can hold a closer point. Ties resolve to the smallest point index.
class NearestNeighborGrid {
 public:
  struct Hit {
    int index = -1;
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  NearestNeighborGrid() = default;
  explicit NearestNeighborGrid(const std::vector<Vec3>& points, double cell_size = 0.0)
      : points_(&points) {
    if (points.empty()) return;
    Vec3 lo = points.front(), hi = points.front();
    for (const auto& p : points) {
      if (!p.allFinite()) throw std::invalid_argument("NearestNeighborGrid: non-finite point");
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    if (!(cell_size > 0.0)) {
      const double extent = (hi - lo).maxCoeff();
      const double per_axis = std::max(1.0, std::round(std::sqrt(static_cast<double>(points.size()) / 4.0)));
      cell_size = extent > 0.0 ? extent / per_axis : 1.0;
    }
    cell_ = cell_size;
    origin_ = lo;
    for (int a = 0; a < 3; ++a) {
      max_cell_[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / cell_));
    }
    std::vector<std::pair<std::uint64_t, int>> keyed;
    keyed.reserve(points.size());
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
      keyed.emplace_back(key(cell_of(points[i])), i);
    }
    std::sort(keyed.begin(), keyed.end());
    order_.reserve(keyed.size());
    for (std::size_t i = 0; i < keyed.size(); ++i) {
      order_.push_back(keyed[i].second);
      auto& range = cells_[keyed[i].first];
      if (range.second == 0) range.first = static_cast<int>(i);
      range.second = static_cast<int>(i) + 1;
    }
  }

  std::size_t size() const noexcept { return points_ ? points_->size() : 0; }
  double cell_size() const noexcept { return cell_; }

  /// Nearest point to q, ignoring index `exclude`.
  Hit nearest(const Vec3& q, int exclude = -1) const {
    Hit best;
    if (size() == 0) return best;
    visit_rings(q, [&](int idx) {
      if (idx == exclude) return;
      const double d = squared_distance(q, (*points_)[idx]);
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) {
        best = {idx, d};
      }
    }, [&](double bound) { return best.index >= 0 && best.squared_distance <= bound * bound; });
    return best;
  }

  /// The k nearest points sorted by (distance, index).
  std::vector<Hit> knn(const Vec3& q, int k, int exclude = -1) const {
    std::vector<Hit> out;
    if (size() == 0 || k <= 0) return out;
    auto worse = [](const Hit& a, const Hit& b) {
      return a.squared_distance < b.squared_distance ||
             (a.squared_distance == b.squared_distance && a.index < b.index);
    };
    std::priority_queue<Hit, std::vector<Hit>, decltype(worse)> heap(worse);
    visit_rings(q, [&](int idx) {
      if (idx == exclude) return;
      const Hit h{idx, squared_distance(q, (*points_)[idx])};
      if (static_cast<int>(heap.size()) < k) {
        heap.push(h);
      } else if (worse(h, heap.top())) {
        heap.pop();
        heap.push(h);
      }
    }, [&](double bound) {
      return static_cast<int>(heap.size()) == k && heap.top().squared_distance <= bound * bound;
    });
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  /// Indices of all points with distance <= radius, ascending.
  std::vector<int> radius(const Vec3& q, double r) const {
    std::vector<int> out;
    if (size() == 0 || r < 0.0) return out;
    const double r2 = r * r;
    const Vec3 lo_q = q.array() - r, hi_q = q.array() + r;
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor((lo_q[a] - origin_[a]) / cell_)));
      hi[a] = std::min(max_cell_[a], static_cast<int>(std::floor((hi_q[a] - origin_[a]) / cell_)));
    }
    for (int i = lo[0]; i <= hi[0]; ++i) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        for (int k = lo[2]; k <= hi[2]; ++k) {
          for_cell({i, j, k}, [&](int idx) {
            if (squared_distance(q, (*points_)[idx]) <= r2) out.push_back(idx);
          });
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Cell = std::array<int, 3>;

  Cell cell_of(const Vec3& p) const {
    Cell c;
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - origin_[a]) / cell_)), 0, max_cell_[a]);
    }
    return c;
  }

  static std::uint64_t key(const Cell& c) {
    return (static_cast<std::uint64_t>(c[0]) << 42) | (static_cast<std::uint64_t>(c[1]) << 21) |
           static_cast<std::uint64_t>(c[2]);
  }

  template <typename F>
  void for_cell(const Cell& c, F&& f) const {
    const auto it = cells_.find(key(c));
    if (it == cells_.end()) return;
    for (int i = it->second.first; i < it->second.second; ++i) f(order_[i]);
  }

  // Visits ring 0, 1, 2, ... around the query's (unclamped) cell. After ring r
  // every unvisited point is at least r * cell_ away from a query inside its
  // cell; queries outside the grid get a looser but still valid bound.
  template <typename Visit, typename Done>
  void visit_rings(const Vec3& q, Visit&& visit, Done&& done) const {
    Cell qc;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((q[a] - origin_[a]) / cell_);
      qc[a] = static_cast<int>(std::clamp(f, -1e9, 1e9));
    }
    // Distance from q to the grid box gives the rings that cannot contain data.
    int start = 0;
    double outside = 0.0;
    for (int a = 0; a < 3; ++a) {
      int gap = 0;
      if (qc[a] < 0) gap = -qc[a];
      if (qc[a] > max_cell_[a]) gap = qc[a] - max_cell_[a];
      start = std::max(start, gap);
      const double lo = origin_[a], hi = origin_[a] + (max_cell_[a] + 1) * cell_;
      const double d = q[a] < lo ? lo - q[a] : (q[a] > hi ? q[a] - hi : 0.0);
      outside += d * d;
    }
    int max_ring = start;
    for (int a = 0; a < 3; ++a) {
      max_ring = std::max({max_ring, std::abs(qc[a]), std::abs(max_cell_[a] - qc[a])});
    }
    const double outside_dist = std::sqrt(outside);
    for (int r = start; r <= max_ring; ++r) {
      const int i0 = std::max(qc[0] - r, 0), i1 = std::min(qc[0] + r, max_cell_[0]);
      const int j0 = std::max(qc[1] - r, 0), j1 = std::min(qc[1] + r, max_cell_[1]);
      const int k0 = std::max(qc[2] - r, 0), k1 = std::min(qc[2] + r, max_cell_[2]);
      for (int i = i0; i <= i1; ++i) {
        for (int j = j0; j <= j1; ++j) {
          if (std::abs(i - qc[0]) == r || std::abs(j - qc[1]) == r) {
            for (int k = k0; k <= k1; ++k) for_cell({i, j, k}, visit);
          } else {
            if (qc[2] - r >= 0 && qc[2] - r <= max_cell_[2]) for_cell({i, j, qc[2] - r}, visit);
            if (r > 0 && qc[2] + r >= 0 && qc[2] + r <= max_cell_[2]) {
              for_cell({i, j, qc[2] + r}, visit);
            }
          }
        }
      }
      // Every cell in ring r + 1 or beyond is at least r cells from q's cell.
      if (done(std::max(static_cast<double>(r) * cell_, outside_dist))) return;
    }
  }

  const std::vector<Vec3>* points_ = nullptr;
  double cell_ = 1.0;
  Vec3 origin_ = Vec3::Zero();
  std::array<int, 3> max_cell_{0, 0, 0};
  std::vector<int> order_;
  std::unordered_map<std::uint64_t, std::pair<int, int>> cells_;
};

}  // namespace gbr
