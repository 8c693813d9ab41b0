#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gbr/ba/types.hpp"
#include "gbr/io/synthetic.hpp"

namespace gbr {

/// Exact multi-view tracks on a synthetic surface: rays through random pixels
/// of each view hit the surface, and every other view that sees the hit point
/// unoccluded inside its image contributes an observation. Pixels receive
/// Gaussian noise of `sigma_px`.
inline MatchSet synthetic_tracks(const GroundTruth& truth, int per_view, std::uint64_t seed,
                                 double sigma_px = 0.0) {
  const auto& rig = truth.rig;
  const int n = static_cast<int>(rig.size());
  std::mt19937_64 rng(detail::mix_seed(seed, 91));
  std::normal_distribution<double> nd(0.0, 1.0);
  MatchSet out;
  for (int v = 0; v < n; ++v) {
    const auto& k = rig.intrinsics[v];
    std::uniform_real_distribution<double> ux(0.0, k.width - 1.0), uy(0.0, k.height - 1.0);
    const Vec3 eye = rig.poses[v].center();
    for (int s = 0; s < per_view; ++s) {
      const Vec2 px(ux(rng), uy(rng));
      const Vec3 dir = rig.poses[v].rotation().transpose() * k.ray(px);
      const auto t = truth.surface.intersect(eye, dir);
      if (!t) continue;
      const Vec3 x = eye + *t * dir;
      Track tr;
      tr.point = x;
      tr.initial_point = x;
      for (int u = 0; u < n; ++u) {
        const auto q = project(x, rig.intrinsics[u], rig.poses[u]);
        if (!q || !rig.intrinsics[u].contains(*q)) continue;
        const Vec3 cu = rig.poses[u].center();
        const auto hit = truth.surface.intersect(cu, x - cu);
        if (!hit || std::abs(*hit - 1.0) > 1e-6) continue;
        Observation o;
        o.view = u;
        o.pixel = *q;
        if (sigma_px > 0.0) o.pixel += sigma_px * Vec2(nd(rng), nd(rng));
        tr.observations.push_back(o);
      }
      if (tr.observations.size() >= 2) out.tracks.push_back(std::move(tr));
    }
  }
  out.candidate_matches = out.filtered_matches = out.retained_matches = out.tracks.size();
  return out;
}

}  // namespace gbr
