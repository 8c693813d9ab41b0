#pragma once

// Pairwise point-map registration. For every pair prediction (k, l) the
// pixel-aligned maps P^{l,l} (own frame of l) and P^{l,k} (l predicted in
// k's frame) give correspondences weighted by C^{l,l} * C^{l,k}. Per-view
// similarities S_v (own frame -> unified frame, S_0 = identity) minimize
//   sum_pairs sum_i w_i * |S_k P^{l,k}_i - S_l P^{l,l}_i|
// starting from chained per-pair Umeyama estimates.

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/geometry/umeyama.hpp"
#include "gbr/io/scene.hpp"

namespace gbr {

struct AlignmentOptions {
  double min_confidence = 0.0;  // cells at or below are ignored
  int max_iterations = 100;
  double smoothing = 1e-9;      // relative to the median point norm
  double tolerance = 1e-12;     // relative energy decrease to stop
};

struct AlignmentResult {
  std::vector<SimilarityTransform> transforms;  // own frame -> unified frame
  std::vector<std::pair<int, int>> dropped_pairs;
  std::vector<std::string> warnings;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  int iterations = 0;

  /// Camera pose implied by S_v: the own frame is the camera frame up to scale.
  CameraPose pose(int v) const {
    const auto& s = transforms[v];
    return CameraPose::from_center(s.rotation().transpose(), s.translation());
  }
};

namespace detail {

struct AlignEdge {
  int k = 0, l = 0;
  std::vector<Vec3> a;  // P^{l,k}, frame k
  std::vector<Vec3> b;  // P^{l,l}, frame l
  std::vector<double> w;
};

struct AlignParams {
  double log_scale = 0.0;
  Vec3 omega = Vec3::Zero();
  Vec3 t = Vec3::Zero();
};

inline SimilarityTransform apply_step(const SimilarityTransform& s, const AlignParams& d) {
  return {s.scale() * std::exp(d.log_scale), orthonormalize(so3_exp(d.omega) * s.rotation()),
          s.translation() + d.t};
}

}  // namespace detail

inline std::string describe_components(const std::vector<int>& comp, int n) {
  std::string out;
  const int count = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  for (int c = 0; c < count; ++c) {
    out += c ? " " : "";
    out += "{";
    bool first = true;
    for (int v = 0; v < n; ++v) {
      if (comp[v] != c) continue;
      out += (first ? "" : ",") + std::to_string(v);
      first = false;
    }
    out += "}";
  }
  return out;
}

inline AlignmentResult pairwise_align(const std::vector<PointMapFrame>& own,
                                      const std::vector<PairPrediction>& predictions,
                                      const AlignmentOptions& opt = {}) {
  const int n = static_cast<int>(own.size());
  if (n == 0) throw ConfigError("pairwise_align: no views");
  AlignmentResult res;

  std::vector<detail::AlignEdge> edges;
  std::vector<std::vector<std::pair<int, SimilarityTransform>>> adj(n);  // S_{k<-l}
  for (const auto& p : predictions) {
    if (p.first < 0 || p.second < 0 || p.first >= n || p.second >= n || p.first == p.second) {
      throw ConfigError("pairwise_align: prediction indices out of range");
    }
    const auto& self = own[p.second];
    require_same_shape(self.points, p.points.points, "pairwise_align");
    detail::AlignEdge e;
    e.k = p.first;
    e.l = p.second;
    for (std::size_t i = 0; i < self.points.size(); ++i) {
      const double c1 = self.confidence[i], c2 = p.points.confidence[i];
      if (!(c1 > opt.min_confidence && c2 > opt.min_confidence)) continue;
      if (!self.points[i].allFinite() || !p.points.points[i].allFinite()) continue;
      e.a.push_back(p.points.points[i]);
      e.b.push_back(self.points[i]);
      e.w.push_back(c1 * c2);
    }
    if (e.a.size() < 3) {
      res.dropped_pairs.emplace_back(e.k, e.l);
      res.warnings.push_back("pair (" + std::to_string(e.k) + "," + std::to_string(e.l) +
                             ") dropped: fewer than 3 confident correspondences");
      continue;
    }
    SimilarityTransform s_kl;
    try {
      s_kl = umeyama(e.b, e.a, e.w, true);
    } catch (const NumericalError& err) {
      res.dropped_pairs.emplace_back(e.k, e.l);
      res.warnings.push_back("pair (" + std::to_string(e.k) + "," + std::to_string(e.l) +
                             ") dropped: " + err.what());
      continue;
    }
    adj[e.k].emplace_back(e.l, s_kl);
    adj[e.l].emplace_back(e.k, s_kl.inverse());
    edges.push_back(std::move(e));
  }

  // Connected components of the surviving pair graph.
  std::vector<int> comp(n, -1);
  int ncomp = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    comp[s] = ncomp;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (const auto& [v, _] : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = ncomp;
          q.push(v);
        }
      }
    }
    ++ncomp;
  }
  if (ncomp > 1) {
    throw ConfigError("pairwise_align: pair graph is disconnected; components " +
                      describe_components(comp, n));
  }

  // Spanning-tree initialization from view 0. adj[u] holds S_{u<-v}.
  res.transforms.assign(n, SimilarityTransform::identity());
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (const auto& [v, s_uv] : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      res.transforms[v] = res.transforms[u] * s_uv;
      q.push(v);
    }
  }

  // Joint refinement.
  std::vector<double> norms;
  for (const auto& e : edges) {
    for (const auto& b : e.b) norms.push_back(b.norm());
  }
  double scale_ref = 1.0;
  if (!norms.empty()) {
    std::nth_element(norms.begin(), norms.begin() + norms.size() / 2, norms.end());
    scale_ref = std::max(norms[norms.size() / 2], 1e-300);
  }
  const double eta2 = std::pow(opt.smoothing * scale_ref, 2);

  auto energy = [&](const std::vector<SimilarityTransform>& s) {
    double total = 0.0;
    for (const auto& e : edges) {
      for (std::size_t i = 0; i < e.a.size(); ++i) {
        const Vec3 r = s[e.k](e.a[i]) - s[e.l](e.b[i]);
        total += e.w[i] * std::sqrt(r.squaredNorm() + eta2);
      }
    }
    return total;
  };

  const int np = 7 * (n - 1);
  auto gradient = [&](const std::vector<SimilarityTransform>& s, Eigen::VectorXd& g,
                      Eigen::VectorXd& h) {
    g.setZero(np);
    h.setZero(np);
    for (const auto& e : edges) {
      for (std::size_t i = 0; i < e.a.size(); ++i) {
        const Vec3 yk = s[e.k](e.a[i]);
        const Vec3 yl = s[e.l](e.b[i]);
        const Vec3 r = yk - yl;
        const double rho = std::sqrt(r.squaredNorm() + eta2);
        const Vec3 dr = e.w[i] * r / rho;
        const double curv = e.w[i] / rho;
        for (int side = 0; side < 2; ++side) {
          const int v = side == 0 ? e.k : e.l;
          if (v == 0) continue;
          const double sign = side == 0 ? 1.0 : -1.0;
          const Vec3 y = side == 0 ? yk : yl;
          const Vec3 m = y - s[v].translation();  // d y / d log s
          const int o = 7 * (v - 1);
          g[o] += sign * dr.dot(m);
          h[o] += curv * m.squaredNorm();
          // d y / d omega = -[m]x, so g += sign * (m x dr).
          const Vec3 gw = sign * m.cross(dr);
          g.segment<3>(o + 1) += gw;
          h.segment<3>(o + 1) += curv * (Vec3::Constant(m.squaredNorm()) - m.cwiseAbs2());
          g.segment<3>(o + 4) += sign * dr;
          h.segment<3>(o + 4) += Vec3::Constant(curv);
        }
      }
    }
  };

  double e0 = energy(res.transforms);
  res.initial_energy = e0;
  Eigen::VectorXd g, h;
  for (int it = 0; it < opt.max_iterations && n > 1; ++it) {
    gradient(res.transforms, g, h);
    Eigen::VectorXd step(np);
    for (int i = 0; i < np; ++i) step[i] = -g[i] / std::max(h[i], 1e-300);
    const double slope = g.dot(step);
    if (!(slope < 0.0)) break;
    double alpha = 1.0;
    bool accepted = false;
    std::vector<SimilarityTransform> trial;
    double e1 = e0;
    for (int bt = 0; bt < 40; ++bt) {
      trial = res.transforms;
      for (int v = 1; v < n; ++v) {
        const int o = 7 * (v - 1);
        detail::AlignParams d;
        d.log_scale = alpha * step[o];
        d.omega = alpha * step.segment<3>(o + 1);
        d.t = alpha * step.segment<3>(o + 4);
        trial[v] = detail::apply_step(res.transforms[v], d);
      }
      e1 = energy(trial);
      if (e1 <= e0 + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || !(e1 < e0)) break;
    res.transforms = std::move(trial);
    ++res.iterations;
    const double rel = (e0 - e1) / std::max(e0, 1e-300);
    e0 = e1;
    if (rel < opt.tolerance) break;
  }
  res.final_energy = e0;
  return res;
}

inline AlignmentResult pairwise_align(const SceneBundle& scene, const AlignmentOptions& opt = {}) {
  std::vector<PointMapFrame> own;
  for (const auto& v : scene.views) own.push_back(v.pointmap);
  std::vector<PairPrediction> preds;
  for (const auto& [a, b] : scene.pairs) {
    for (const auto& [k, l] : {std::pair{a, b}, std::pair{b, a}}) {
      if (const auto* p = scene.prediction(k, l)) preds.push_back(*p);
    }
  }
  return pairwise_align(own, preds, opt);
}

/// Point maps of every view expressed in the unified frame.
inline std::vector<PointMapFrame> unify_frames(const std::vector<PointMapFrame>& own,
                                               const std::vector<SimilarityTransform>& s) {
  std::vector<PointMapFrame> out = own;
  for (std::size_t v = 0; v < out.size(); ++v) {
    for (auto& p : out[v].points.data()) {
      if (p.allFinite()) p = s[v](p);
    }
    out[v].reference_frame = -1;
  }
  return out;
}

}  // namespace gbr
