#pragma once

// Synthetic scenes with known geometry. Each view gets a point map in its own
// camera frame (scaled by a per-view factor, like independent network
// inferences), pair predictions for every listed pair, confidences, an RGB
// image, a sky mask for missed rays, and a secondary match confidence.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "gbr/core/geometry_types.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/core/rig.hpp"
#include "gbr/io/ply.hpp"
#include "gbr/io/scene.hpp"

namespace gbr {

enum class SurfaceKind { kPlane, kSphere, kHeightfield };

/// Unit sphere at the origin, or the square |x|,|y| <= extent at z = 0
/// (optionally displaced by Gaussian bumps).
class AnalyticSurface {
 public:
  struct Bump {
    double cx, cy, amplitude, sigma;
  };

  AnalyticSurface() = default;
  AnalyticSurface(SurfaceKind kind, std::uint64_t seed, int bumps = 6, double extent = 1.5)
      : kind_(kind), extent_(extent) {
    if (kind_ == SurfaceKind::kHeightfield) {
      std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 17);
      std::uniform_real_distribution<double> pos(-0.7 * extent, 0.7 * extent);
      std::uniform_real_distribution<double> amp(0.08, 0.25);
      std::uniform_real_distribution<double> sig(0.2, 0.45);
      for (int i = 0; i < bumps; ++i) {
        const double cx = pos(rng), cy = pos(rng), a = amp(rng), s = sig(rng);
        bumps_.push_back({cx, cy, a, s});
        max_height_ += a;
      }
    }
  }

  SurfaceKind kind() const noexcept { return kind_; }
  double extent() const noexcept { return extent_; }
  const std::vector<Bump>& bumps() const noexcept { return bumps_; }

  double height(double x, double y) const {
    double h = 0.0;
    for (const auto& b : bumps_) {
      const double dx = x - b.cx, dy = y - b.cy;
      h += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    }
    return h;
  }

  Vec2 height_gradient(double x, double y) const {
    Vec2 g = Vec2::Zero();
    for (const auto& b : bumps_) {
      const double dx = x - b.cx, dy = y - b.cy, s2 = b.sigma * b.sigma;
      const double e = b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
      g += Vec2(-dx / s2, -dy / s2) * e;
    }
    return g;
  }

  /// Outward normal (up for the plane-like surfaces).
  Vec3 normal(const Vec3& p) const {
    if (kind_ == SurfaceKind::kSphere) return p.normalized();
    const Vec2 g = height_gradient(p.x(), p.y());
    return Vec3(-g.x(), -g.y(), 1.0).normalized();
  }

  /// Nearest ray parameter t > 0 with origin + t * dir on the surface.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const {
    if (kind_ == SurfaceKind::kSphere) {
      const double a = dir.squaredNorm();
      const double b = origin.dot(dir) / a;
      const double c = (origin.squaredNorm() - 1.0) / a;
      const double disc = b * b - c;
      if (disc < 0.0) return std::nullopt;
      const double s = std::sqrt(disc);
      double t = -b - s;
      if (!(t > 1e-9)) t = -b + s;
      if (!(t > 1e-9)) return std::nullopt;
      return t;
    }
    if (std::abs(dir.z()) < 1e-15) return std::nullopt;
    std::optional<double> hit;
    if (kind_ == SurfaceKind::kPlane || max_height_ == 0.0) {
      const double t = -origin.z() / dir.z();
      if (t > 1e-9) hit = t;
    } else {
      hit = intersect_heightfield(origin, dir);
    }
    if (!hit) return std::nullopt;
    const Vec3 p = origin + *hit * dir;
    if (std::abs(p.x()) > extent_ || std::abs(p.y()) > extent_) return std::nullopt;
    return hit;
  }

  /// Triangulated surface; `resolution` controls the tessellation density.
  TriangleMesh mesh(int resolution = 128) const {
    TriangleMesh m;
    if (kind_ == SurfaceKind::kSphere) {
      const int rings = resolution, segs = 2 * resolution;
      for (int i = 0; i <= rings; ++i) {
        const double th = std::numbers::pi * i / rings;
        for (int j = 0; j < segs; ++j) {
          const double ph = 2.0 * std::numbers::pi * j / segs;
          const Vec3 p(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
          m.vertices.push_back(p);
          m.normals.push_back(p);
        }
      }
      for (int i = 0; i < rings; ++i) {
        for (int j = 0; j < segs; ++j) {
          const int a = i * segs + j, b = i * segs + (j + 1) % segs;
          const int c = a + segs, d = b + segs;
          if (i > 0) m.faces.push_back({a, c, b});
          if (i + 1 < rings) m.faces.push_back({b, c, d});
        }
      }
      return m;
    }
    const int n = resolution;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        const double x = -extent_ + 2.0 * extent_ * j / n;
        const double y = -extent_ + 2.0 * extent_ * i / n;
        const Vec3 p(x, y, height(x, y));
        m.vertices.push_back(p);
        m.normals.push_back(normal(p));
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int a = i * (n + 1) + j, b = a + 1, c = a + n + 1, d = c + 1;
        m.faces.push_back({a, b, d});
        m.faces.push_back({a, d, c});
      }
    }
    return m;
  }

 private:
  std::optional<double> intersect_heightfield(const Vec3& o, const Vec3& d) const {
    auto f = [&](double t) {
      const Vec3 p = o + t * d;
      return p.z() - height(p.x(), p.y());
    };
    // Bracket the slab 0 <= z <= max_height along the ray.
    double t0 = (max_height_ - o.z()) / d.z();
    double t1 = -o.z() / d.z();
    if (t0 > t1) std::swap(t0, t1);
    t0 = std::max(t0, 1e-9);
    if (t1 <= t0) return std::nullopt;
    const int steps = 256;
    double prev_t = t0, prev_f = f(t0);
    if (prev_f == 0.0) return prev_t;
    for (int s = 1; s <= steps; ++s) {
      const double t = t0 + (t1 - t0) * s / steps;
      const double ft = f(t);
      if ((prev_f > 0.0) != (ft > 0.0) || ft == 0.0) {
        double lo = prev_t, hi = t, flo = prev_f;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = f(mid);
          if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        return 0.5 * (lo + hi);
      }
      prev_t = t;
      prev_f = ft;
    }
    return std::nullopt;
  }

  SurfaceKind kind_ = SurfaceKind::kSphere;
  double extent_ = 1.5;
  double max_height_ = 0.0;
  std::vector<Bump> bumps_;
};

/// Cells inside a disk of one view whose depth is scaled along the ray.
struct CorruptRegion {
  int view = 0;
  Vec2 center = Vec2::Zero();
  double radius = 0.0;  // pixels
  double depth_scale = 1.0;
};

struct SyntheticSceneSpec {
  SurfaceKind surface = SurfaceKind::kSphere;
  std::uint64_t seed = 0;
  int views = 6;
  int width = 96;
  int height = 72;
  double focal = 100.0;
  double ring_radius = 3.0;
  double ring_elevation = -1.0;  // radians; negative selects a per-surface default
  double arc_degrees = 360.0;
  double pose_jitter = 0.0;      // relative to ring radius
  double sigma_px = 0.0;
  double sigma_3d = 0.0;
  double scale_drift = 0.0;      // log-normal sigma of the per-view point-map scale
  double corruption_fraction = 0.0;
  double corruption_offset = 0.1;
  std::optional<CorruptRegion> corrupt_region;
  int bumps = 6;
  bool pair_predictions = true;
  double confidence_gain = 9.0;  // primary confidence = 1 + gain * cos(incidence)

  void validate() const {
    if (views < 2) throw std::invalid_argument("SyntheticSceneSpec: need at least 2 views");
    if (width < 2 || height < 2) throw std::invalid_argument("SyntheticSceneSpec: bad size");
    if (!(focal > 0.0)) throw std::invalid_argument("SyntheticSceneSpec: focal must be > 0");
    if (!(ring_radius > 0.0)) {
      throw std::invalid_argument("SyntheticSceneSpec: degenerate camera ring (radius 0)");
    }
    if (surface == SurfaceKind::kSphere && !(ring_radius > 1.0)) {
      throw std::invalid_argument("SyntheticSceneSpec: camera ring inside the sphere");
    }
    if (!(sigma_px >= 0.0 && sigma_3d >= 0.0 && scale_drift >= 0.0 && pose_jitter >= 0.0 &&
          corruption_offset >= 0.0)) {
      throw std::invalid_argument("SyntheticSceneSpec: noise parameters must be >= 0");
    }
    if (!(confidence_gain >= 0.0)) throw std::invalid_argument("SyntheticSceneSpec: confidence gain must be >= 0");
    if (!(corruption_fraction >= 0.0 && corruption_fraction <= 1.0)) {
      throw std::invalid_argument("SyntheticSceneSpec: corruption fraction outside [0, 1]");
    }
  }
};

struct GroundTruth {
  CameraRig rig;
  std::vector<DepthMap> depths;
  TriangleMesh mesh;
  AnalyticSurface surface;
  std::vector<double> pointmap_scales;  // per-view own-frame scale factor
};

struct SyntheticScene {
  SceneBundle bundle;
  GroundTruth truth;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (a + 1) + 0xBF58476D1CE4E5B9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Texture {
 public:
  explicit Texture(std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 991));
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    for (int c = 0; c < 3; ++c) {
      low_[c] = Vec3(n(rng), n(rng), n(rng)).normalized() * 6.0;
      high_[c] = Vec3(n(rng), n(rng), n(rng)).normalized() * 19.0;
      phase_low_[c] = u(rng);
      phase_high_[c] = u(rng);
    }
  }

  Vec3 operator()(const Vec3& p) const {
    Vec3 c;
    for (int i = 0; i < 3; ++i) {
      c[i] = 0.5 + 0.3 * std::sin(low_[i].dot(p) + phase_low_[i]) +
             0.15 * std::sin(high_[i].dot(p) + phase_high_[i]);
    }
    return c;
  }

 private:
  Vec3 low_[3], high_[3];
  double phase_low_[3], phase_high_[3];
};

}  // namespace detail

inline constexpr double kSyntheticSkyColor[3] = {0.55, 0.7, 0.9};

inline CameraRig synthetic_rig(const SyntheticSceneSpec& spec) {
  spec.validate();
  double elevation = spec.ring_elevation;
  if (elevation < 0.0) elevation = spec.surface == SurfaceKind::kSphere ? 0.35 : 1.2;
  std::mt19937_64 rng(detail::mix_seed(spec.seed, 7));
  std::normal_distribution<double> n(0.0, 1.0);
  const double arc = spec.arc_degrees * std::numbers::pi / 180.0;
  const bool closed = std::abs(spec.arc_degrees - 360.0) < 1e-9;
  CameraRig rig;
  for (int v = 0; v < spec.views; ++v) {
    const double frac = closed ? double(v) / spec.views : double(v) / (spec.views - 1);
    const double th = arc * frac;
    Vec3 eye = spec.ring_radius * Vec3(std::cos(elevation) * std::cos(th),
                                       std::cos(elevation) * std::sin(th), std::sin(elevation));
    Vec3 target = Vec3::Zero();
    if (spec.pose_jitter > 0.0) {
      eye += spec.pose_jitter * spec.ring_radius * Vec3(n(rng), n(rng), n(rng));
      target += spec.pose_jitter * Vec3(n(rng), n(rng), n(rng));
    }
    rig.intrinsics.emplace_back(spec.focal, spec.focal, 0.5 * spec.width, 0.5 * spec.height,
                                spec.width, spec.height);
    rig.poses.push_back(look_at(eye, target, Vec3::UnitZ()));
  }
  return rig;
}

inline SyntheticScene generate_synthetic(const SyntheticSceneSpec& spec) {
  spec.validate();
  SyntheticScene out;
  GroundTruth& gt = out.truth;
  gt.surface = AnalyticSurface(spec.surface, spec.seed, spec.bumps);
  gt.rig = synthetic_rig(spec);
  gt.mesh = gt.surface.mesh(spec.surface == SurfaceKind::kSphere ? 96 : 160);
  const detail::Texture texture(spec.seed);
  const int n = spec.views;
  const int w = spec.width, h = spec.height;

  {
    std::mt19937_64 rng(detail::mix_seed(spec.seed, 11));
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int v = 0; v < n; ++v) {
      gt.pointmap_scales.push_back(v == 0 || spec.scale_drift == 0.0
                                       ? 1.0
                                       : std::exp(spec.scale_drift * nd(rng)));
    }
  }

  // World-space hit points per view (after jitter and corruption).
  std::vector<Raster<Vec3>> hits;
  std::vector<Raster<double>> conf, mconf;
  auto& bundle = out.bundle;
  for (int v = 0; v < n; ++v) {
    const auto& k = gt.rig.intrinsics[v];
    const auto& pose = gt.rig.poses[v];
    const Vec3 eye = pose.center();
    std::mt19937_64 rng(detail::mix_seed(spec.seed, 100 + v));
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);

    Raster<Vec3> hit(w, h, nan_vec3());
    Raster<double> c(w, h, 0.0), mc(w, h, 0.0);
    RgbImage image(w, h, Vec3(kSyntheticSkyColor[0], kSyntheticSkyColor[1], kSyntheticSkyColor[2]));
    Mask sky(w, h, 0);
    DepthMap depth(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Vec3 center_dir = pose.rotation().transpose() * k.ray(Vec2(x, y));
        if (const auto t = gt.surface.intersect(eye, center_dir)) {
          depth.set(x, y, *t);  // the ray has unit camera z, so t is the z-depth
        }
        Vec2 px(x, y);
        if (spec.sigma_px > 0.0) px += spec.sigma_px * Vec2(nd(rng), nd(rng));
        const Vec3 dir = pose.rotation().transpose() * k.ray(px);
        const auto t = gt.surface.intersect(eye, dir);
        if (!t) {
          sky(x, y) = 255;
          continue;
        }
        Vec3 p = eye + *t * dir;
        image(x, y) = texture(p).cwiseMax(0.0).cwiseMin(1.0);
        const double cos_theta = std::max(0.0, -dir.normalized().dot(gt.surface.normal(p)));
        double cv = 1.0 + spec.confidence_gain * cos_theta;
        double mv = 0.2 + 0.8 * cos_theta;
        if (spec.corrupt_region && spec.corrupt_region->view == v &&
            (Vec2(x, y) - spec.corrupt_region->center).norm() <= spec.corrupt_region->radius) {
          p = eye + spec.corrupt_region->depth_scale * (p - eye);
        }
        if (spec.corruption_fraction > 0.0 && ud(rng) < spec.corruption_fraction) {
          const Vec3 dirn = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
          p += spec.corruption_offset * dirn;
          cv *= 0.05;
          mv = 0.01;
        }
        hit(x, y) = p;
        c(x, y) = cv;
        mc(x, y) = mv;
      }
    }
    gt.depths.push_back(std::move(depth));

    SceneView view;
    view.image = std::move(image);
    view.sky = std::move(sky);
    view.match_confidence = mc;
    view.pointmap.frame_id = v;
    view.pointmap.reference_frame = v;
    view.pointmap.confidence = c;
    view.pointmap.points = Raster<Vec3>(w, h, nan_vec3());
    bundle.views.push_back(std::move(view));
    hits.push_back(std::move(hit));
    conf.push_back(std::move(c));
    mconf.push_back(std::move(mc));
  }

  // Point map of view `l` as predicted in view `k`'s frame.
  auto predict = [&](int k, int l, std::uint64_t stream) {
    std::mt19937_64 rng(detail::mix_seed(spec.seed, stream, static_cast<std::uint64_t>(k * n + l)));
    std::normal_distribution<double> nd(0.0, 1.0);
    PointMapFrame f;
    f.frame_id = l;
    f.reference_frame = k;
    f.points = Raster<Vec3>(w, h, nan_vec3());
    f.confidence = conf[l];
    const double g = gt.pointmap_scales[k];
    for (std::size_t i = 0; i < f.points.size(); ++i) {
      if (!hits[l][i].allFinite()) continue;
      Vec3 pc = gt.rig.poses[k].transform(hits[l][i]);
      if (spec.sigma_3d > 0.0) pc += spec.sigma_3d * Vec3(nd(rng), nd(rng), nd(rng));
      f.points[i] = g * pc;
    }
    f.sanitize();
    return f;
  };

  for (int v = 0; v < n; ++v) bundle.views[v].pointmap = predict(v, v, 200);
  bundle.pairs = default_pairs(n);
  if (spec.pair_predictions) {
    for (const auto& [a, b] : bundle.pairs) {
      bundle.predictions.push_back({a, b, predict(a, b, 300)});
      bundle.predictions.push_back({b, a, predict(b, a, 300)});
    }
  }
  return out;
}

namespace io {

/// Writes the scene plus ground truth under `root/gt`.
inline void save_synthetic(const std::filesystem::path& root, const SyntheticScene& scene) {
  save_scene(root, scene.bundle);
  const auto gt_dir = root / "gt";
  std::filesystem::create_directories(gt_dir);
  save_cameras(gt_dir / "cameras.txt", scene.truth.rig);
  for (std::size_t v = 0; v < scene.truth.depths.size(); ++v) {
    save_depth(gt_dir / indexed_name("depth", static_cast<int>(v), ".raw"), scene.truth.depths[v]);
  }
  save_mesh(gt_dir / "mesh.ply", scene.truth.mesh);
}

}  // namespace io
}  // namespace gbr
