#pragma once

#include <array>
#include <cmath>

#include "gbr/core/maps.hpp"
#include "gbr/core/summation.hpp"

namespace gbr {

struct SsimOptions {
  int radius = 5;  // 11x11 window
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

namespace detail {

/// SSIM map of one channel. Window weights falling outside the image are
/// dropped and the rest renormalized, so every pixel gets a value.
inline Raster<double> ssim_map(const Raster<double>& ra, const Raster<double>& rb,
                               const SsimOptions& opt) {
  const int w = ra.width(), h = ra.height();
  const int r = opt.radius;
  std::vector<double> g(2 * r + 1);
  for (int i = -r; i <= r; ++i) g[i + r] = std::exp(-0.5 * i * i / (opt.sigma * opt.sigma));
  const double c1 = std::pow(opt.k1 * opt.data_range, 2);
  const double c2 = std::pow(opt.k2 * opt.data_range, 2);
  Raster<double> out(w, h, 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sw = 0, ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          const double wt = g[dx + r] * g[dy + r];
          const double a = ra(xx, yy), b = rb(xx, yy);
          sw += wt;
          ma += wt * a;
          mb += wt * b;
          aa += wt * a * a;
          bb += wt * b * b;
          ab += wt * a * b;
        }
      }
      ma /= sw;
      mb /= sw;
      const double va = aa / sw - ma * ma, vb = bb / sw - mb * mb, cov = ab / sw - ma * mb;
      out(x, y) = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return out;
}

}  // namespace detail

/// Mean SSIM over all pixels.
inline double ssim(const Raster<double>& a, const Raster<double>& b, const SsimOptions& opt = {}) {
  require_same_shape(a, b, "ssim");
  if (a.empty()) return 1.0;
  const auto m = detail::ssim_map(a, b, opt);
  CompensatedSum s;
  for (double v : m.data()) s += v;
  return s.value() / static_cast<double>(m.size());
}

/// Mean SSIM over all pixels and the three channels.
inline double ssim(const RgbImage& a, const RgbImage& b, const SsimOptions& opt = {}) {
  require_same_shape(a, b, "ssim");
  if (a.empty()) return 1.0;
  CompensatedSum s;
  for (int c = 0; c < 3; ++c) {
    Raster<double> ca(a.width(), a.height()), cb(b.width(), b.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ca[i] = a[i][c];
      cb[i] = b[i][c];
    }
    s += ssim(ca, cb, opt) * static_cast<double>(a.size());
  }
  return s.value() / (3.0 * static_cast<double>(a.size()));
}

}  // namespace gbr
