#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "gbr/core/error.hpp"
#include "gbr/core/gaussian.hpp"
#include "gbr/core/geometry_types.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/geometry/kdtree.hpp"

namespace gbr {

struct SplatScene {
  std::vector<GaussianPrimitive> primitives;
  Vec3 background = Vec3::Zero();

  void validate() const {
    for (const auto& g : primitives) g.validate();
  }
};

struct RenderOptions {
  double covariance_floor = 0.3;       // px^2 added to the 2D covariance
  double transmittance_cutoff = 1e-4;  // blending stops below this
  double alpha_min = 1.0 / 255.0;      // contributions below are skipped; bounds the footprint
  double near = 0.01;                  // camera-frame z culling plane
  double valid_alpha = 0.5;            // depth and normal valid above this coverage

  void validate() const {
    if (!(covariance_floor > 0.0)) throw ConfigError("render: covariance floor must be > 0");
    if (!(transmittance_cutoff >= 0.0 && transmittance_cutoff < 1.0)) {
      throw ConfigError("render: transmittance cutoff must lie in [0, 1)");
    }
    if (!(alpha_min > 0.0 && alpha_min < 1.0)) throw ConfigError("render: alpha_min must lie in (0, 1)");
    if (!(near > 0.0)) throw ConfigError("render: near plane must be > 0");
  }
};

struct RenderOutput {
  RgbImage color;
  NormalMap normal;          // camera frame, facing the camera
  Raster<double> distance;   // blended plane distance, normalized by coverage
  DepthMap depth;            // ray / blended-plane intersection
  Raster<double> alpha;      // 1 - prod(1 - alpha_i)
};

struct ProjectedGaussian {
  Vec2 mean;
  Mat2 cov;
  double depth = 0.0;  // camera-frame z of the center
  Vec3 normal;         // camera frame, sign toward the camera
  double distance = 0.0;
};

/// Screen-space footprint of `g`: perspective center and J W Sigma W^T J^T
/// plus the covariance floor. nullopt when the center is in front of `near`.
inline std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& g, const CameraIntrinsics& k,
                                                         const CameraPose& pose, const RenderOptions& opt = {}) {
  const Vec3 pc = pose.transform(g.position);
  if (!(pc.z() > opt.near)) return std::nullopt;
  const double z = pc.z(), z2 = z * z;
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx / z, 0.0, -k.fx * pc.x() / z2, 0.0, k.fy / z, -k.fy * pc.y() / z2;
  const Mat3& w = pose.rotation();
  ProjectedGaussian out;
  out.mean = Vec2(k.fx * pc.x() / z + k.cx, k.fy * pc.y() / z + k.cy);
  out.cov = j * w * g.covariance() * w.transpose() * j.transpose();
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  out.cov.diagonal().array() += opt.covariance_floor;
  out.depth = z;
  Vec3 n = w * g.normal();
  if (n.dot(pc) > 0.0) n = -n;
  out.normal = n;
  out.distance = pc.dot(n);
  return out;
}

namespace detail {

/// Total order on primitive content; ties between identical primitives are
/// harmless since they contribute identically.
inline bool content_less(const GaussianPrimitive& a, const GaussianPrimitive& b) {
  auto key = [](const GaussianPrimitive& g) {
    return std::make_tuple(g.position.x(), g.position.y(), g.position.z(), g.rotation.w(), g.rotation.x(),
                           g.rotation.y(), g.rotation.z(), g.scale.x(), g.scale.y(), g.scale.z(), g.opacity,
                           g.color.x(), g.color.y(), g.color.z());
  };
  return key(a) < key(b);
}

struct Footprint {
  std::size_t prim;
  ProjectedGaussian proj;
  Mat2 info;  // inverse covariance
  int x0, x1, y0, y1;
};

}  // namespace detail

/// Front-to-back alpha blending of all primitives in depth order of their
/// centers. Color, normal and plane distance are blended with weights
/// alpha_i T_i; depth is the blended distance over N . K^-1 p.
inline RenderOutput render(const SplatScene& scene, const CameraIntrinsics& k, const CameraPose& pose,
                           const RenderOptions& opt = {}) {
  if (scene.primitives.empty()) throw EmptyResultError("render: scene has no primitives");
  k.validate();
  opt.validate();
  scene.validate();
  const int w = k.width, h = k.height;

  std::vector<detail::Footprint> fps;
  fps.reserve(scene.primitives.size());
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const auto& g = scene.primitives[i];
    if (g.opacity < opt.alpha_min) continue;
    auto p = project_gaussian(g, k, pose, opt);
    if (!p) continue;
    const double lmax = Eigen::SelfAdjointEigenSolver<Mat2>(p->cov, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double r = std::sqrt(2.0 * std::log(g.opacity / opt.alpha_min) * lmax);
    detail::Footprint f{i, *p, p->cov.inverse(), 0, 0, 0, 0};
    const double lo_x = std::ceil(p->mean.x() - r), hi_x = std::floor(p->mean.x() + r);
    const double lo_y = std::ceil(p->mean.y() - r), hi_y = std::floor(p->mean.y() + r);
    if (hi_x < 0 || hi_y < 0 || lo_x > w - 1 || lo_y > h - 1) continue;
    f.x0 = static_cast<int>(std::max(lo_x, 0.0));
    f.x1 = static_cast<int>(std::min(hi_x, w - 1.0));
    f.y0 = static_cast<int>(std::max(lo_y, 0.0));
    f.y1 = static_cast<int>(std::min(hi_y, h - 1.0));
    fps.push_back(f);
  }
  std::sort(fps.begin(), fps.end(), [&](const detail::Footprint& a, const detail::Footprint& b) {
    if (a.proj.depth != b.proj.depth) return a.proj.depth < b.proj.depth;
    const auto& ga = scene.primitives[a.prim];
    const auto& gb = scene.primitives[b.prim];
    if (detail::content_less(ga, gb)) return true;
    if (detail::content_less(gb, ga)) return false;
    return a.prim < b.prim;
  });

  std::vector<std::vector<std::uint32_t>> rows(static_cast<std::size_t>(h));
  for (std::size_t s = 0; s < fps.size(); ++s) {
    for (int y = fps[s].y0; y <= fps[s].y1; ++y) rows[static_cast<std::size_t>(y)].push_back(static_cast<std::uint32_t>(s));
  }

  RenderOutput out;
  out.color = RgbImage(w, h, Vec3::Zero());
  out.normal = NormalMap(w, h);
  out.distance = Raster<double>(w, h, 0.0);
  out.depth = DepthMap(w, h);
  out.alpha = Raster<double>(w, h, 0.0);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 4)
#endif
  for (int y = 0; y < h; ++y) {
    std::vector<double> trans(static_cast<std::size_t>(w), 1.0);
    std::vector<Vec3> color(static_cast<std::size_t>(w), Vec3::Zero()), normal(static_cast<std::size_t>(w), Vec3::Zero());
    std::vector<double> dist(static_cast<std::size_t>(w), 0.0);
    for (const std::uint32_t s : rows[static_cast<std::size_t>(y)]) {
      const auto& f = fps[s];
      const auto& g = scene.primitives[f.prim];
      for (int x = f.x0; x <= f.x1; ++x) {
        double& t = trans[static_cast<std::size_t>(x)];
        if (t < opt.transmittance_cutoff) continue;
        const Vec2 d = Vec2(x, y) - f.proj.mean;
        const double a = g.opacity * std::exp(-0.5 * d.dot(f.info * d));
        if (a < opt.alpha_min) continue;
        const double wgt = a * t;
        color[static_cast<std::size_t>(x)] += wgt * g.color;
        normal[static_cast<std::size_t>(x)] += wgt * f.proj.normal;
        dist[static_cast<std::size_t>(x)] += wgt * f.proj.distance;
        t *= 1.0 - a;
      }
    }
    for (int x = 0; x < w; ++x) {
      const std::size_t xi = static_cast<std::size_t>(x);
      const double a = 1.0 - trans[xi];
      out.alpha(x, y) = a;
      out.color(x, y) = color[xi] + trans[xi] * scene.background;
      if (!(a > 0.0)) continue;
      out.distance(x, y) = dist[xi] / a;
      if (!(a > opt.valid_alpha)) continue;
      const double len = normal[xi].norm();
      if (!(len > 1e-12)) continue;
      const Vec3 n = normal[xi] / len;
      out.normal.normals(x, y) = n;
      out.normal.valid(x, y) = 1;
      const double denom = n.dot(k.ray(Vec2(x, y)));
      const double z = out.distance(x, y) / denom;
      if (denom < 0.0 && z > 0.0 && std::isfinite(z)) out.depth.set(x, y, z);
    }
  }
  return out;
}

struct SplatInitOptions {
  int neighbors = 8;        // k for the local PCA frame and spacing
  double scale_factor = 1.0;  // tangential scale in units of mean neighbour distance
  double thickness = 0.05;  // normal-axis scale relative to the tangential one
  double opacity = 0.9;
  Vec3 default_color = Vec3::Constant(0.5);
};

/// One flat Gaussian per point: the local PCA plane of its k nearest
/// neighbours sets the rotation (third axis = smallest-variance direction),
/// the mean neighbour distance sets the tangential scale.
inline SplatScene scene_from_cloud(const PointCloud& cloud, const SplatInitOptions& opt = {}) {
  if (cloud.empty()) throw EmptyResultError("scene_from_cloud: empty point cloud");
  if (opt.neighbors < 3) throw ConfigError("scene_from_cloud: need at least 3 neighbours");
  if (!(opt.scale_factor > 0.0 && opt.thickness > 0.0)) throw ConfigError("scene_from_cloud: scales must be > 0");
  if (!(opt.opacity > 0.0 && opt.opacity <= 1.0)) throw ConfigError("scene_from_cloud: opacity must lie in (0, 1]");
  const auto& pts = cloud.points;
  const KdTree tree(pts);
  SplatScene scene;
  scene.primitives.resize(pts.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pts.size()); ++i) {
    const auto hits = tree.knn(pts[i], opt.neighbors, static_cast<int>(i));
    GaussianPrimitive g;
    g.position = pts[i];
    g.opacity = opt.opacity;
    g.color = cloud.has_colors() ? cloud.colors[i].cwiseMax(0.0).cwiseMin(1.0) : opt.default_color;
    double spacing = 0.0;
    Vec3 mean = pts[i];
    for (const auto& hit : hits) {
      spacing += std::sqrt(hit.squared_distance);
      mean += pts[hit.index];
    }
    mean /= static_cast<double>(hits.size() + 1);
    Mat3 cov = (pts[i] - mean) * (pts[i] - mean).transpose();
    for (const auto& hit : hits) cov += (pts[hit.index] - mean) * (pts[hit.index] - mean).transpose();
    spacing = hits.empty() ? 1e-3 : std::max(spacing / static_cast<double>(hits.size()), 1e-9);
    Mat3 r = Mat3::Identity();
    if (hits.size() >= 2) {
      const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
      r.col(0) = es.eigenvectors().col(2);
      r.col(1) = es.eigenvectors().col(1);
      r.col(2) = r.col(0).cross(r.col(1)).normalized();
      r.col(1) = r.col(2).cross(r.col(0)).normalized();
      r.col(0).normalize();
    }
    if (cloud.has_normals() && cloud.normals[i].allFinite() && r.col(2).dot(cloud.normals[i]) < 0.0) {
      r.col(2) = -r.col(2);
      r.col(1) = -r.col(1);
    }
    g.rotation = Eigen::Quaterniond(r).normalized();
    const double s = opt.scale_factor * spacing;
    g.scale = Vec3(s, s, s * opt.thickness);
    scene.primitives[static_cast<std::size_t>(i)] = g;
  }
  return scene;
}

}  // namespace gbr
