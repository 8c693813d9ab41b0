#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

#include "gbr/geometry/nn_grid.hpp"

namespace gbr {

/// Exact nearest-neighbour queries over a static point set. Pruning uses
/// node bounding boxes with a non-strict test, so ties resolve to the
/// smallest point index like the brute-force scan.
class KdTree {
 public:
  using Hit = NearestNeighborGrid::Hit;

  KdTree() = default;
  explicit KdTree(const std::vector<Vec3>& points, int leaf_size = 8)
      : points_(&points), leaf_(std::max(1, leaf_size)) {
    for (const auto& p : points) {
      if (!p.allFinite()) throw std::invalid_argument("KdTree: non-finite point");
    }
    idx_.resize(points.size());
    std::iota(idx_.begin(), idx_.end(), 0);
    if (!points.empty()) build(0, static_cast<int>(points.size()));
  }

  std::size_t size() const noexcept { return points_ ? points_->size() : 0; }

  Hit nearest(const Vec3& q, int exclude = -1) const {
    Hit best;
    if (nodes_.empty()) return best;
    nearest_rec(0, q, exclude, best);
    return best;
  }

  /// The k nearest points sorted by (distance, index).
  std::vector<Hit> knn(const Vec3& q, int k, int exclude = -1) const {
    std::vector<Hit> out;
    if (nodes_.empty() || k <= 0) return out;
    std::priority_queue<Hit, std::vector<Hit>, decltype(&worse)> heap(&worse);
    knn_rec(0, q, k, exclude, heap);
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    int begin = 0, end = 0;
    int left = -1, right = -1;
    Vec3 lo, hi;
  };

  static bool worse(const Hit& a, const Hit& b) {
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
  }

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Vec3 lo = (*points_)[idx_[begin]], hi = lo;
    for (int i = begin; i < end; ++i) {
      lo = lo.cwiseMin((*points_)[idx_[i]]);
      hi = hi.cwiseMax((*points_)[idx_[i]]);
    }
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin > leaf_) {
      int axis = 0;
      (hi - lo).maxCoeff(&axis);
      const int mid = begin + (end - begin) / 2;
      std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                       [&](int a, int b) { return (*points_)[a][axis] < (*points_)[b][axis]; });
      const int l = build(begin, mid);
      const int r = build(mid, end);
      nodes_[id].left = l;
      nodes_[id].right = r;
    }
    return id;
  }

  static double box_distance(const Node& n, const Vec3& q) {
    const Vec3 d = (n.lo - q).cwiseMax(q - n.hi).cwiseMax(0.0);
    return d.squaredNorm();
  }

  void nearest_rec(int id, const Vec3& q, int exclude, Hit& best) const {
    const Node& n = nodes_[id];
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int p = idx_[i];
        if (p == exclude) continue;
        const Hit h{p, squared_distance(q, (*points_)[p])};
        if (best.index < 0 || worse(h, best)) best = h;
      }
      return;
    }
    const double dl = box_distance(nodes_[n.left], q), dr = box_distance(nodes_[n.right], q);
    const int first = dl <= dr ? n.left : n.right, second = dl <= dr ? n.right : n.left;
    const double d1 = std::min(dl, dr), d2 = std::max(dl, dr);
    if (best.index < 0 || d1 <= best.squared_distance) nearest_rec(first, q, exclude, best);
    if (best.index < 0 || d2 <= best.squared_distance) nearest_rec(second, q, exclude, best);
  }

  template <typename Heap>
  void knn_rec(int id, const Vec3& q, int k, int exclude, Heap& heap) const {
    const Node& n = nodes_[id];
    auto full = [&] { return static_cast<int>(heap.size()) == k; };
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int p = idx_[i];
        if (p == exclude) continue;
        const Hit h{p, squared_distance(q, (*points_)[p])};
        if (!full()) {
          heap.push(h);
        } else if (worse(h, heap.top())) {
          heap.pop();
          heap.push(h);
        }
      }
      return;
    }
    const double dl = box_distance(nodes_[n.left], q), dr = box_distance(nodes_[n.right], q);
    const int first = dl <= dr ? n.left : n.right, second = dl <= dr ? n.right : n.left;
    const double d1 = std::min(dl, dr), d2 = std::max(dl, dr);
    if (!full() || d1 <= heap.top().squared_distance) knn_rec(first, q, k, exclude, heap);
    if (!full() || d2 <= heap.top().squared_distance) knn_rec(second, q, k, exclude, heap);
  }

  const std::vector<Vec3>* points_ = nullptr;
  int leaf_ = 8;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
};

}  // namespace gbr
