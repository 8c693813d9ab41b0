#pragma once

#include <cmath>
#include <deque>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"

namespace gbr {

struct ScaleCorrectionConfig {
  int window = 25;
  int stride = 1;
  double eps_edge = 1e-7;
  double eps_smooth = 1e-7;
  double tau_e = 0.5;

  void validate() const {
    if (window < 3 || window % 2 == 0) throw ConfigError("scale correction: window must be odd and >= 3");
    if (stride < 1) throw ConfigError("scale correction: stride must be >= 1");
    if (!(eps_edge >= 0.0 && eps_smooth >= 0.0)) throw ConfigError("scale correction: eps must be >= 0");
    if (!(tau_e > 0.0)) throw ConfigError("scale correction: tau_e must be > 0");
  }
};

struct AffineField {
  Raster<double> a, b;
};

namespace detail {

/// Summed-area table with a zero first row and column.
class Integral {
 public:
  Integral(int w, int h) : w_(w + 1), s_(static_cast<std::size_t>(w + 1) * (h + 1), 0.0) {}
  template <typename F>
  void build(int w, int h, F&& f) {
    for (int y = 0; y < h; ++y) {
      double row = 0.0;
      for (int x = 0; x < w; ++x) {
        row += f(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }
  /// Sum over [x0, x1) x [y0, y1).
  double sum(int x0, int y0, int x1, int y1) const {
    return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
  }

 private:
  double& at(int x, int y) { return s_[static_cast<std::size_t>(y) * w_ + x]; }
  double at(int x, int y) const { return s_[static_cast<std::size_t>(y) * w_ + x]; }
  int w_;
  std::vector<double> s_;
};

/// Per-pixel regularizer: eps_edge where the central-difference gradient of
/// D0, divided by the local mean depth, reaches tau_e.
inline Raster<double> edge_epsilon(const DepthMap& d0, const ScaleCorrectionConfig& cfg) {
  const int w = d0.width(), h = d0.height();
  Raster<double> eps(w, h, cfg.eps_smooth);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!d0.is_valid(x, y)) continue;
      auto at = [&](int xx, int yy) { return d0.is_valid(xx, yy) ? d0.depth(xx, yy) : d0.depth(x, y); };
      const double gx = 0.5 * (at(x + 1, y) - at(x - 1, y));
      const double gy = 0.5 * (at(x, y + 1) - at(x, y - 1));
      const double local = (at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1) + d0.depth(x, y)) / 5.0;
      if (std::hypot(gx, gy) / local >= cfg.tau_e) eps(x, y) = cfg.eps_edge;
    }
  }
  return eps;
}

}  // namespace detail

/// Window coefficients (a_k, b_k) minimizing sum (a D + b - D0)^2 + eps a^2
/// over the jointly valid cells of each window, on the window-center grid
/// 0, stride, 2 stride, ... Windows with fewer than 4 valid cells inherit the
/// coefficients of the nearest valid window.
inline AffineField window_coefficients(const DepthMap& d, const DepthMap& d0, const ScaleCorrectionConfig& cfg) {
  cfg.validate();
  require_same_shape(d.depth, d0.depth, "scale_correct");
  const int w = d.width(), h = d.height(), r = cfg.window / 2;
  // Shifted values keep the running sums well conditioned.
  const double sd = d.mean_valid(), s0 = d0.mean_valid();
  auto joint = [&](int x, int y) { return d.is_valid(x, y) && d0.is_valid(x, y); };
  const auto eps = detail::edge_epsilon(d0, cfg);
  detail::Integral n(w, h), sx(w, h), sy(w, h), sxx(w, h), sxy(w, h), se(w, h);
  n.build(w, h, [&](int x, int y) { return joint(x, y) ? 1.0 : 0.0; });
  sx.build(w, h, [&](int x, int y) { return joint(x, y) ? d.depth(x, y) - sd : 0.0; });
  sy.build(w, h, [&](int x, int y) { return joint(x, y) ? d0.depth(x, y) - s0 : 0.0; });
  sxx.build(w, h, [&](int x, int y) { return joint(x, y) ? std::pow(d.depth(x, y) - sd, 2) : 0.0; });
  sxy.build(w, h, [&](int x, int y) {
    return joint(x, y) ? (d.depth(x, y) - sd) * (d0.depth(x, y) - s0) : 0.0;
  });
  se.build(w, h, [&](int x, int y) { return joint(x, y) ? eps(x, y) : 0.0; });

  const int gw = (w - 1) / cfg.stride + 1, gh = (h - 1) / cfg.stride + 1;
  AffineField f{Raster<double>(gw, gh, 0.0), Raster<double>(gw, gh, 0.0)};
  Mask ok(gw, gh, 0);
  std::deque<std::pair<int, int>> queue;
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const int cx = gx * cfg.stride, cy = gy * cfg.stride;
      const int x0 = std::max(0, cx - r), y0 = std::max(0, cy - r);
      const int x1 = std::min(w, cx + r + 1), y1 = std::min(h, cy + r + 1);
      const double cnt = n.sum(x0, y0, x1, y1);
      if (cnt < 4.0) continue;
      const double mx = sx.sum(x0, y0, x1, y1) / cnt, my = sy.sum(x0, y0, x1, y1) / cnt;
      const double var = sxx.sum(x0, y0, x1, y1) / cnt - mx * mx;
      const double cov = sxy.sum(x0, y0, x1, y1) / cnt - mx * my;
      const double e = se.sum(x0, y0, x1, y1) / cnt;
      const double den = var + e / cnt;
      const double a = den > 0.0 ? cov / den : 0.0;
      f.a(gx, gy) = a;
      f.b(gx, gy) = (my + s0) - a * (mx + sd);
      ok(gx, gy) = 1;
      queue.emplace_back(gx, gy);
    }
  }
  if (queue.empty()) throw NumericalError("scale_correct: no window has 4 jointly valid cells");
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& o : nb) {
      const int xx = x + o[0], yy = y + o[1];
      if (!ok.in_bounds(xx, yy) || ok(xx, yy)) continue;
      f.a(xx, yy) = f.a(x, y);
      f.b(xx, yy) = f.b(x, y);
      ok(xx, yy) = 1;
      queue.emplace_back(xx, yy);
    }
  }
  return f;
}

/// Per-pixel coefficients: the mean over all covering windows at stride 1,
/// bilinear interpolation of the window grid otherwise.
inline AffineField pixel_coefficients(const AffineField& grid, int w, int h, const ScaleCorrectionConfig& cfg) {
  AffineField out{Raster<double>(w, h, 0.0), Raster<double>(w, h, 0.0)};
  if (cfg.stride == 1) {
    const int r = cfg.window / 2;
    detail::Integral ia(w, h), ib(w, h);
    ia.build(w, h, [&](int x, int y) { return grid.a(x, y); });
    ib.build(w, h, [&](int x, int y) { return grid.b(x, y); });
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int x0 = std::max(0, x - r), y0 = std::max(0, y - r);
        const int x1 = std::min(w, x + r + 1), y1 = std::min(h, y + r + 1);
        const double cnt = static_cast<double>((x1 - x0) * (y1 - y0));
        out.a(x, y) = ia.sum(x0, y0, x1, y1) / cnt;
        out.b(x, y) = ib.sum(x0, y0, x1, y1) / cnt;
      }
    }
    return out;
  }
  const int gw = grid.a.width(), gh = grid.a.height();
  for (int y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / cfg.stride;
    const int y0 = std::min(static_cast<int>(fy), gh - 1), y1 = std::min(y0 + 1, gh - 1);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / cfg.stride;
      const int x0 = std::min(static_cast<int>(fx), gw - 1), x1 = std::min(x0 + 1, gw - 1);
      const double tx = fx - x0;
      auto lerp = [&](const Raster<double>& g) {
        return (1 - ty) * ((1 - tx) * g(x0, y0) + tx * g(x1, y0)) + ty * ((1 - tx) * g(x0, y1) + tx * g(x1, y1));
      };
      out.a(x, y) = lerp(grid.a);
      out.b(x, y) = lerp(grid.b);
    }
  }
  return out;
}

/// Spatially variant affine correction of D against the scale-accurate D0.
inline DepthMap scale_correct(const DepthMap& d, const DepthMap& d0, const ScaleCorrectionConfig& cfg = {}) {
  const auto grid = window_coefficients(d, d0, cfg);
  const auto px = pixel_coefficients(grid, d.width(), d.height(), cfg);
  DepthMap out(d.width(), d.height());
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    if (!d.valid[i]) continue;
    const double v = px.a[i] * d.depth[i] + px.b[i];
    if (v > 0.0 && std::isfinite(v)) {
      out.depth[i] = v;
      out.valid[i] = 1;
    }
  }
  return out;
}

}  // namespace gbr
