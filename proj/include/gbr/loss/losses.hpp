#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/core/summation.hpp"
#include "gbr/loss/ssim.hpp"

namespace gbr {

struct SupervisionConfig {
  double beta = 0.1;
  int normal_window = 3;
  int pseudo_view_count = 1;  // per adjacent pair of real views
  double pseudo_epsilon = 0.02;
  double lambda_pho = 0.2;
  double lambda1 = 0.005;  // normal
  double lambda2 = 0.005;  // depth
  double lambda3 = 0.1;    // normal-depth consistency
  double lambda4 = 0.1;    // cycle projection
  double pseudo_weight = 0.5;

  void validate() const {
    if (!(beta >= 0.0)) throw ConfigError("supervision: beta must be >= 0");
    if (normal_window < 1 || normal_window % 2 == 0) throw ConfigError("supervision: normal window must be odd");
    if (pseudo_view_count < 0) throw ConfigError("supervision: pseudo view count must be >= 0");
    if (!(pseudo_epsilon >= 0.0)) throw ConfigError("supervision: pseudo epsilon must be >= 0");
    if (!(lambda_pho >= 0.0 && lambda_pho <= 1.0)) throw ConfigError("supervision: lambda_pho must lie in [0, 1]");
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0 && lambda4 >= 0.0)) {
      throw ConfigError("supervision: loss weights must be >= 0");
    }
    if (!(pseudo_weight >= 0.0)) throw ConfigError("supervision: pseudo weight must be >= 0");
  }
};

/// Confidence weight of a reference depth: 1 / (1 + beta |D* - D0| / |D0|).
inline double depth_weight(double dstar, double d0, double beta) {
  return 1.0 / (1.0 + beta * std::abs(dstar - d0) / std::abs(d0));
}

/// Weighted mean of |D* - D| over pixels valid in all three maps and not sky.
inline double depth_loss(const DepthMap& dstar, const DepthMap& d0, const DepthMap& rendered, const Mask& sky = {},
                         const SupervisionConfig& cfg = {}) {
  require_same_shape(dstar.depth, d0.depth, "depth_loss");
  require_same_shape(dstar.depth, rendered.depth, "depth_loss");
  if (!sky.empty()) require_same_shape(dstar.depth, sky, "depth_loss");
  CompensatedSum num, den;
  for (std::size_t i = 0; i < dstar.depth.size(); ++i) {
    if (!dstar.valid[i] || !d0.valid[i] || !rendered.valid[i]) continue;
    if (!sky.empty() && sky[i]) continue;
    const double w = depth_weight(dstar.depth[i], d0.depth[i], cfg.beta);
    num += w * std::abs(dstar.depth[i] - rendered.depth[i]);
    den += w;
  }
  if (!(den.value() > 0.0)) throw EmptyResultError("depth_loss: no valid non-sky pixel");
  return num.value() / den.value();
}

/// Local normal consistency C: mean cosine between the valid normals of the
/// w x w window (clipped at the border) and their normalized mean.
inline Raster<double> normal_consistency(const NormalMap& n, int window) {
  const int w = n.width(), h = n.height(), r = window / 2;
  Raster<double> c(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!n.is_valid(x, y)) continue;
      Vec3 mean = Vec3::Zero();
      int cnt = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (!n.is_valid(x + dx, y + dy)) continue;
          mean += n.normals(x + dx, y + dy);
          ++cnt;
        }
      }
      const double len = mean.norm();
      if (!(len > 1e-12)) continue;
      mean /= len;
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (n.is_valid(x + dx, y + dy)) s += n.normals(x + dx, y + dy).dot(mean);
        }
      }
      c(x, y) = std::clamp(s / cnt, -1.0, 1.0);
    }
  }
  return c;
}

/// Structure-aware normal loss: L1 difference weighted by (1 + C) / 2, with
/// C computed on the depth-derived normals.
inline double normal_loss(const NormalMap& rendered, const NormalMap& derived, const SupervisionConfig& cfg = {}) {
  require_same_shape(rendered.normals, derived.normals, "normal_loss");
  const auto c = normal_consistency(derived, cfg.normal_window);
  CompensatedSum num, den;
  for (std::size_t i = 0; i < rendered.normals.size(); ++i) {
    if (!rendered.valid[i] || !derived.valid[i]) continue;
    const double w = 0.5 * (1.0 + c[i]);
    num += w * (rendered.normals[i] - derived.normals[i]).cwiseAbs().sum();
    den += w;
  }
  if (!(den.value() > 0.0)) throw EmptyResultError("normal_loss: no pixel with both normals valid");
  return num.value() / den.value();
}

/// Central-difference gradient magnitude of D, min-max normalized to [0, 1]
/// over the pixels where it is defined; all zero when D is constant there.
inline Raster<double> normalized_depth_gradient(const DepthMap& d, Mask* defined = nullptr) {
  const int w = d.width(), h = d.height();
  Raster<double> g(w, h, 0.0);
  Mask ok(w, h, 0);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (!d.is_valid(x - 1, y) || !d.is_valid(x + 1, y) || !d.is_valid(x, y - 1) || !d.is_valid(x, y + 1)) continue;
      const double gx = 0.5 * (d.depth(x + 1, y) - d.depth(x - 1, y));
      const double gy = 0.5 * (d.depth(x, y + 1) - d.depth(x, y - 1));
      g(x, y) = std::hypot(gx, gy);
      ok(x, y) = 1;
      lo = std::min(lo, g(x, y));
      hi = std::max(hi, g(x, y));
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (ok[i] && hi > lo) ? (g[i] - lo) / (hi - lo) : 0.0;
  }
  if (defined) *defined = ok;
  return g;
}

/// Normal-depth consistency: (1 / WH) sum |grad D| ||N_hat - N||_1 with N_hat
/// derived from the rendered depth.
inline double ndc_loss(const DepthMap& depth, const NormalMap& normal, const CameraIntrinsics& k) {
  require_same_shape(depth.depth, normal.normals, "ndc_loss");
  const auto g = normalized_depth_gradient(depth);
  const auto derived = normals_from_depth(depth, k);
  CompensatedSum s;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == 0.0 || !derived.valid[i] || !normal.valid[i]) continue;
    s += g[i] * (derived.normals[i] - normal.normals[i]).cwiseAbs().sum();
  }
  return s.value() / static_cast<double>(depth.depth.size());
}

namespace detail {

/// Bilinear depth at a sub-pixel position; nullopt outside the image or when
/// a contributing corner is invalid.
inline std::optional<double> sample_depth(const DepthMap& d, const Vec2& p) {
  constexpr double kSlack = 1e-9;  // px; absorbs round-off of positions on the last row or column
  const int w = d.width(), h = d.height();
  if (!(p.x() >= -kSlack && p.y() >= -kSlack && p.x() <= w - 1 + kSlack && p.y() <= h - 1 + kSlack)) {
    return std::nullopt;
  }
  const double px = std::clamp(p.x(), 0.0, w - 1.0), py = std::clamp(p.y(), 0.0, h - 1.0);
  const int x0 = std::min(static_cast<int>(std::floor(px)), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(py)), std::max(h - 2, 0));
  const double fx = px - x0, fy = py - y0;
  double v = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      if (wgt == 0.0) continue;
      if (!d.is_valid(x0 + dx, y0 + dy)) return std::nullopt;
      v += wgt * d.depth(x0 + dx, y0 + dy);
    }
  }
  return v;
}

}  // namespace detail

struct CycleLossResult {
  double loss = 0.0;  // px^2
  std::size_t round_trips = 0;
  std::size_t occluded = 0;
};

struct CycleOptions {
  double occlusion_tolerance = 0.0;  // relative; 0 keeps every round trip
};

/// Cycle projection a -> b -> a: each valid pixel of a is lifted with D_a,
/// projected into b, lifted again with bilinear D_b and projected back. With
/// an occlusion tolerance, pixels whose depth in b disagrees with D_b by more
/// than that fraction are skipped.
inline CycleLossResult cycle_loss(const DepthMap& da, const CameraIntrinsics& ka, const CameraPose& pa,
                                  const DepthMap& db, const CameraIntrinsics& kb, const CameraPose& pb,
                                  const CycleOptions& opt = {}) {
  if (!(opt.occlusion_tolerance >= 0.0)) throw ConfigError("cycle_loss: occlusion tolerance must be >= 0");
  CycleLossResult res;
  CompensatedSum s;
  for (int y = 0; y < da.height(); ++y) {
    for (int x = 0; x < da.width(); ++x) {
      if (!da.is_valid(x, y)) continue;
      const Vec3 xw = unproject(Vec2(x, y), da.depth(x, y), ka, pa);
      const auto ub = project(xw, kb, pb);
      if (!ub) continue;
      const auto zb = detail::sample_depth(db, *ub);
      if (!zb || !(*zb > 0.0)) continue;
      if (opt.occlusion_tolerance > 0.0) {
        const double z = pb.transform(xw).z();
        if (std::abs(z - *zb) > opt.occlusion_tolerance * z) {
          ++res.occluded;
          continue;
        }
      }
      const auto ua = project(unproject(*ub, *zb, kb, pb), ka, pa);
      if (!ua || !ka.contains(*ua)) continue;
      s += (*ua - Vec2(x, y)).squaredNorm();
      ++res.round_trips;
    }
  }
  if (res.round_trips == 0) throw EmptyResultError("cycle_loss: no pixel survives the round trip");
  res.loss = s.value() / static_cast<double>(res.round_trips);
  return res;
}

/// (1 - lambda) L1 + lambda (1 - SSIM); L1 is the mean over pixels and channels.
inline double photometric_loss(const RgbImage& rendered, const RgbImage& reference, double lambda) {
  require_same_shape(rendered, reference, "photometric_loss");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("photometric_loss: lambda must lie in [0, 1]");
  if (rendered.empty()) throw EmptyResultError("photometric_loss: empty images");
  CompensatedSum l1;
  for (std::size_t i = 0; i < rendered.size(); ++i) l1 += (rendered[i] - reference[i]).cwiseAbs().sum();
  const double mean_l1 = l1.value() / (3.0 * static_cast<double>(rendered.size()));
  const double structural = lambda > 0.0 ? 1.0 - ssim(rendered, reference) : 0.0;
  return (1.0 - lambda) * mean_l1 + lambda * structural;
}

struct LossComponents {
  double normal = 0.0;
  double depth = 0.0;
  double ndc = 0.0;
  double cycle = 0.0;
  double photometric = 0.0;
};

struct LossBreakdown {
  LossComponents raw;
  LossComponents weighted;
  double scale = 1.0;  // pseudo-view multiplier
  double total = 0.0;

  nlohmann::json to_json() const {
    auto terms = [](const LossComponents& c) {
      return nlohmann::json{{"normal", c.normal}, {"depth", c.depth}, {"ndc", c.ndc}, {"cycle", c.cycle},
                            {"photometric", c.photometric}};
    };
    return {{"raw", terms(raw)}, {"weighted", terms(weighted)}, {"scale", scale}, {"total", total}};
  }
};

/// lambda1 L_nor + lambda2 L_dep + lambda3 L_ndc + lambda4 L_mv + L_pho, scaled
/// by the pseudo weight for pseudo views.
inline LossBreakdown total_loss(const LossComponents& c, const SupervisionConfig& cfg = {}, bool is_pseudo = false) {
  cfg.validate();
  LossBreakdown b;
  b.raw = c;
  b.scale = is_pseudo ? cfg.pseudo_weight : 1.0;
  b.weighted.normal = b.scale * cfg.lambda1 * c.normal;
  b.weighted.depth = b.scale * cfg.lambda2 * c.depth;
  b.weighted.ndc = b.scale * cfg.lambda3 * c.ndc;
  b.weighted.cycle = b.scale * cfg.lambda4 * c.cycle;
  b.weighted.photometric = b.scale * c.photometric;
  b.total = b.scale * (cfg.lambda1 * c.normal + cfg.lambda2 * c.depth + cfg.lambda3 * c.ndc + cfg.lambda4 * c.cycle +
                       c.photometric);
  return b;
}

}  // namespace gbr
