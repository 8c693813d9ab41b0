#pragma once

#include <cstdint>

#include "gbr/core/camera.hpp"
#include "gbr/core/maps.hpp"

namespace gbr::fixture {

/// Same generator as the oracle script.
class Lcg {
 public:
  explicit Lcg(std::uint32_t seed) : s_(seed) {}
  double operator()() {
    s_ = 1664525u * s_ + 1013904223u;
    return s_ / 4294967296.0;
  }

 private:
  std::uint32_t s_;
};

inline CameraIntrinsics fixture_k() {
  CameraIntrinsics k;
  k.width = k.height = 4;
  k.fx = k.fy = 4.0;
  k.cx = k.cy = 1.5;
  return k;
}

inline CameraIntrinsics intrinsics(int w, int h, double f) {
  CameraIntrinsics k;
  k.width = w;
  k.height = h;
  k.fx = k.fy = f;
  k.cx = 0.5 * (w - 1);
  k.cy = 0.5 * (h - 1);
  return k;
}

struct DepthFixture {
  DepthMap dstar{4, 4}, d0{4, 4}, rendered{4, 4};
  Mask sky{4, 4, 0};
};

inline DepthFixture depth_fixture() {
  DepthFixture f;
  Lcg r(1);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const double ds = 2.0 + r();
      f.dstar.set(x, y, ds);
      f.d0.set(x, y, ds * (1.0 + 0.6 * (r() - 0.5)));
      f.rendered.set(x, y, ds + 0.4 * (r() - 0.5));
    }
  }
  f.d0.valid(3, 0) = 0;
  f.sky(1, 2) = 1;
  return f;
}

inline NormalMap random_normals(std::uint32_t seed) {
  Lcg r(seed);
  NormalMap n(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const double a = r() - 0.5, b = r() - 0.5;
      n.normals(x, y) = Vec3(a, b, -1.0).normalized();
      n.valid(x, y) = 1;
    }
  }
  return n;
}

inline NormalMap constant_normals(int w, int h, const Vec3& n) {
  NormalMap out(w, h);
  out.normals.fill(n.normalized());
  out.valid.fill(1);
  return out;
}

inline DepthMap constant_depth(int w, int h, double d) {
  DepthMap out(w, h);
  out.depth.fill(d);
  out.valid.fill(1);
  return out;
}

inline RgbImage random_image(Lcg& r) {
  RgbImage img(4, 4);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double a = r(), b = r(), c = r();
    img[i] = Vec3(a, b, c);
  }
  return img;
}


}  // namespace gbr::fixture
