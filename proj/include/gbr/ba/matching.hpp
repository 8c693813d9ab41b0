#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gbr/ba/types.hpp"
#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/geometry/kdtree.hpp"

namespace gbr {

struct MatchOptions {
  double primary_threshold = 3.0;
  double secondary_threshold = 0.05;
  std::size_t cap_per_view = 50000;  // 0 disables the cap
  const std::vector<Mask>* regions = nullptr;  // when set, only cells inside are used
  const std::vector<Mask>* exclude = nullptr;  // cells inside are skipped
};

/// Index pairs (i, j) with j = NN_b(a_i) and i = NN_a(b_j).
inline std::vector<std::pair<int, int>> reciprocal_nearest_neighbors(const std::vector<Vec3>& a,
                                                                     const std::vector<Vec3>& b) {
  std::vector<std::pair<int, int>> out;
  if (a.empty() || b.empty()) return out;
  const KdTree tree_a(a), tree_b(b);
  std::vector<int> nn_b(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) nn_b[j] = tree_a.nearest(b[j]).index;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int j = tree_b.nearest(a[i]).index;
    if (nn_b[j] == static_cast<int>(i)) out.emplace_back(static_cast<int>(i), j);
  }
  return out;
}

namespace detail {

struct CellMatch {
  int view_a, cell_a, view_b, cell_b;
  double score;
};

class TrackUnion {
 public:
  int add(int view) {
    parent_.push_back(static_cast<int>(parent_.size()));
    views_.push_back({view});
    return parent_.back();
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  /// Joins the sets unless that would place two observations of one view in
  /// the same track.
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return true;
    for (int v : views_[a]) {
      if (std::binary_search(views_[b].begin(), views_[b].end(), v)) return false;
    }
    if (views_[a].size() < views_[b].size()) std::swap(a, b);
    parent_[b] = a;
    std::vector<int> merged;
    std::merge(views_[a].begin(), views_[a].end(), views_[b].begin(), views_[b].end(),
               std::back_inserter(merged));
    views_[a] = std::move(merged);
    views_[b].clear();
    return true;
  }

 private:
  std::vector<int> parent_;
  std::vector<std::vector<int>> views_;
};

inline bool usable_cell(const PointMapFrame& f, std::size_t i, int view, const MatchOptions& opt) {
  if (!(f.confidence[i] > 0.0) || !f.points[i].allFinite()) return false;
  if (opt.regions && !(*opt.regions)[view][i]) return false;
  if (opt.exclude && (*opt.exclude)[view][i]) return false;
  return true;
}

}  // namespace detail

/// Dual-filtered reciprocal nearest-neighbour matches between point maps in a
/// common frame, merged into multi-view tracks.
inline MatchSet extract_matches(const std::vector<PointMapFrame>& frames,
                                const std::vector<Raster<double>>& secondary,
                                const std::vector<std::pair<int, int>>& pairs,
                                const MatchOptions& opt = {},
                                const std::vector<RgbImage>* images = nullptr) {
  const int n = static_cast<int>(frames.size());
  if (secondary.size() != frames.size()) {
    throw std::invalid_argument("extract_matches: one secondary confidence map per view required");
  }
  for (int v = 0; v < n; ++v) {
    require_same_shape(frames[v].points, secondary[v], "extract_matches");
  }

  // Usable cells per view.
  std::vector<std::vector<int>> cells(n);
  std::vector<std::vector<Vec3>> pts(n);
  for (int v = 0; v < n; ++v) {
    for (std::size_t i = 0; i < frames[v].points.size(); ++i) {
      if (!detail::usable_cell(frames[v], i, v, opt)) continue;
      cells[v].push_back(static_cast<int>(i));
      pts[v].push_back(frames[v].points[i]);
    }
  }

  MatchSet out;
  std::vector<detail::CellMatch> matches;
  auto passes = [&](int v, int cell) {
    return frames[v].confidence[cell] >= opt.primary_threshold &&
           secondary[v][cell] >= opt.secondary_threshold;
  };
  for (auto [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= n || b >= n || a == b) {
      throw std::invalid_argument("extract_matches: pair index out of range");
    }
    if (a > b) std::swap(a, b);
    for (const auto& [i, j] : reciprocal_nearest_neighbors(pts[a], pts[b])) {
      ++out.candidate_matches;
      const int ca = cells[a][i], cb = cells[b][j];
      if (!passes(a, ca) || !passes(b, cb)) continue;
      const double score = frames[a].confidence[ca] * frames[b].confidence[cb] *
                           secondary[a][ca] * secondary[b][cb];
      matches.push_back({a, ca, b, cb, score});
    }
  }
  out.filtered_matches = matches.size();
  std::sort(matches.begin(), matches.end(), [](const auto& x, const auto& y) {
    if (x.score != y.score) return x.score > y.score;
    return std::tie(x.view_a, x.cell_a, x.view_b, x.cell_b) <
           std::tie(y.view_a, y.cell_a, y.view_b, y.cell_b);
  });
  if (opt.cap_per_view > 0) {
    std::vector<std::size_t> count(n, 0);
    std::vector<detail::CellMatch> kept;
    for (const auto& m : matches) {
      if (count[m.view_a] >= opt.cap_per_view || count[m.view_b] >= opt.cap_per_view) continue;
      ++count[m.view_a];
      ++count[m.view_b];
      kept.push_back(m);
    }
    matches = std::move(kept);
  }
  out.retained_matches = matches.size();

  // Transitive closure with per-view conflict refusal.
  detail::TrackUnion uf;
  std::unordered_map<std::uint64_t, int> node_of;
  std::vector<std::pair<int, int>> node_cell;
  auto node = [&](int v, int cell) {
    const std::uint64_t key = (static_cast<std::uint64_t>(v) << 32) | static_cast<std::uint32_t>(cell);
    auto it = node_of.find(key);
    if (it != node_of.end()) return it->second;
    const int id = uf.add(v);
    node_of.emplace(key, id);
    node_cell.emplace_back(v, cell);
    return id;
  };
  for (const auto& m : matches) uf.unite(node(m.view_a, m.cell_a), node(m.view_b, m.cell_b));

  std::vector<std::vector<int>> groups;
  std::unordered_map<int, int> group_of_root;
  std::vector<int> order(node_cell.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return node_cell[x] < node_cell[y]; });
  for (int id : order) {
    const int root = uf.find(id);
    auto [it, inserted] = group_of_root.emplace(root, static_cast<int>(groups.size()));
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(id);
  }
  for (const auto& g : groups) {
    if (g.size() < 2) continue;
    Track t;
    Vec3 sum = Vec3::Zero(), col = Vec3::Zero();
    double wsum = 0.0;
    for (int id : g) {
      const auto [v, cell] = node_cell[id];
      const auto& f = frames[v];
      const double c = f.confidence[cell];
      sum += c * f.points[cell];
      wsum += c;
      const int w = f.points.width();
      Observation o;
      o.view = v;
      o.cell = cell;
      o.pixel = Vec2(cell % w, cell / w);
      o.confidence = c;
      t.observations.push_back(o);
      if (images) col += (*images)[v][cell];
    }
    t.point = sum / wsum;
    t.initial_point = t.point;
    if (images) t.color = col / static_cast<double>(g.size());
    out.tracks.push_back(std::move(t));
  }
  if (out.tracks.empty()) {
    throw EmptyResultError(
        "extract_matches: no matches survived the confidence filters (primary >= " +
        std::to_string(opt.primary_threshold) + ", secondary >= " +
        std::to_string(opt.secondary_threshold) +
        "); lower the confidence thresholds or check the pair list");
  }
  return out;
}

}  // namespace gbr
