#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gbr/ba/bundle_adjust.hpp"
#include "gbr/ba/matching.hpp"
#include "gbr/ba/synthetic_tracks.hpp"
#include "gbr/depth/aggregate.hpp"
#include "gbr/depth/refine.hpp"
#include "gbr/depth/scale_correct.hpp"
#include "gbr/eval/metrics.hpp"
#include "gbr/geometry/umeyama.hpp"
#include "gbr/io/synthetic.hpp"
#include "gbr/loss/losses.hpp"
#include "gbr/mesh/tsdf.hpp"
#include "gbr/pipeline/pipeline.hpp"
#include "gbr/render/splat.hpp"
#include "support/fixtures.hpp"

using namespace gbr;
using namespace gbr::fixture;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Accumulates named checks; the first failure is kept as the reason.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failure_.empty()) failure_ = what;
  }
  void note(const std::string& key, double value) {
    std::ostringstream s;
    s << key << "=" << value;
    notes_.push_back(s.str());
  }
  bool ok() const { return failure_.empty(); }
  std::string summary() const {
    std::string out;
    for (const auto& n : notes_) out += (out.empty() ? "" : " ") + n;
    if (!failure_.empty()) out += (out.empty() ? "" : " ") + std::string("failed: ") + failure_;
    return out;
  }

 private:
  std::string failure_;
  std::vector<std::string> notes_;
};

// ---------------------------------------------------------------- helpers

Mat3 random_rotation(std::mt19937_64& rng, double degrees) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const Vec3 axis = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
  return so3_exp(axis * degrees * std::numbers::pi / 180.0);
}

std::vector<Vec3> random_points(std::mt19937_64& rng, int n, double extent = 1.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng));
  return p;
}

double center_ate(const CameraRig& est, const CameraRig& gt) {
  const auto a = est.centers(), b = gt.centers();
  const auto s = umeyama(a, b, {}, true);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (s(a[i]) - b[i]).squaredNorm();
  return std::sqrt(sq / static_cast<double>(a.size()));
}

CameraRig perturb(const CameraRig& rig, std::uint64_t seed, double degrees, double rel) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  CameraRig out = rig;
  for (std::size_t v = 1; v < rig.size(); ++v) {
    const Vec3 c = rig.poses[v].center();
    const Vec3 dir = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
    const Mat3 r = random_rotation(rng, degrees) * rig.poses[v].rotation();
    out.poses[v] = CameraPose::from_center(orthonormalize(r), c + rel * c.norm() * dir);
  }
  return out;
}

SyntheticSceneSpec sphere_spec(int views) {
  SyntheticSceneSpec spec;
  spec.surface = SurfaceKind::kSphere;
  spec.views = views;
  return spec;
}

PointMapFrame grid_frame(const std::vector<Vec3>& pts, int w, double conf) {
  PointMapFrame f;
  const int h = static_cast<int>(pts.size()) / w;
  f.points = Raster<Vec3>(w, h, Vec3::Zero());
  f.confidence = Raster<double>(w, h, conf);
  for (std::size_t i = 0; i < pts.size(); ++i) f.points[i] = pts[i];
  return f;
}

int brute_nearest(const Vec3& q, const std::vector<Vec3>& s) {
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = squared_distance(q, s[i]);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<std::pair<int, int>> brute_reciprocal(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int j = brute_nearest(a[i], b);
    if (brute_nearest(b[j], a) == static_cast<int>(i)) out.emplace_back(static_cast<int>(i), j);
  }
  return out;
}

double brute_mean_nn(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double s = 0.0;
  for (const auto& p : a) s += std::sqrt(squared_distance(p, b[brute_nearest(p, b)]));
  return s / static_cast<double>(a.size());
}

double brute_within(const std::vector<Vec3>& q, const std::vector<Vec3>& t, double tau) {
  int n = 0;
  for (const auto& p : q) n += std::sqrt(squared_distance(p, t[brute_nearest(p, t)])) <= tau;
  return static_cast<double>(n) / static_cast<double>(q.size());
}

DepthMap wavy_depth(int w, int h) {
  DepthMap d(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      d.set(x, y, 3.0 + 0.4 * std::sin(0.05 * x) + 0.3 * std::cos(0.07 * y) + 0.05 * std::sin(0.6 * x + 0.4 * y));
    }
  }
  return d;
}

DepthMap affine(const DepthMap& d, double a, double b) {
  DepthMap out = d;
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    if (d.valid[i]) out.depth[i] = a * d.depth[i] + b;
  }
  return out;
}

double max_rel_error(const DepthMap& a, const DepthMap& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.depth.size(); ++i) {
    if (!a.valid[i] || !b.valid[i]) continue;
    worst = std::max(worst, std::abs(a.depth[i] - b.depth[i]) / std::abs(b.depth[i]));
  }
  return worst;
}

double rmse(const DepthMap& a, const DepthMap& b) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < a.depth.size(); ++i) {
    if (!a.valid[i] || !b.valid[i]) continue;
    s += (a.depth[i] - b.depth[i]) * (a.depth[i] - b.depth[i]);
    ++n;
  }
  return std::sqrt(s / n);
}

Eigen::Quaterniond frame_with_normal(const Vec3& n) {
  const Vec3 z = n.normalized();
  const Vec3 x = (std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(z).normalized();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return Eigen::Quaterniond(r).normalized();
}

GaussianPrimitive disk(const Vec3& center, const Vec3& normal, double radius, double opacity, const Vec3& color) {
  GaussianPrimitive g;
  g.position = center;
  g.rotation = frame_with_normal(normal);
  g.scale = Vec3(radius, radius, radius * 1e-4);
  g.opacity = opacity;
  g.color = color;
  return g;
}

SplatScene random_scene(int n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
  SplatScene s;
  s.background = Vec3(0.1, 0.2, 0.3);
  for (int i = 0; i < n; ++i) {
    GaussianPrimitive g;
    g.position = Vec3(0.8 * u(rng), 0.6 * u(rng), 3.0 + u(rng));
    g.rotation = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized();
    g.scale = Vec3(0.02 + 0.1 * pos(rng), 0.02 + 0.1 * pos(rng), 0.005 + 0.02 * pos(rng));
    g.opacity = 0.2 + 0.8 * pos(rng);
    g.color = Vec3(pos(rng), pos(rng), pos(rng));
    s.primitives.push_back(g);
  }
  return s;
}

TsdfVolume fuse_sphere(const SyntheticScene& scene, double voxel, const std::vector<int>& order) {
  auto vol = TsdfVolume::from_bounds(Vec3::Constant(-1.0), Vec3::Constant(1.0), voxel, 5.0 * voxel);
  const auto& t = scene.truth;
  for (int v : order) vol.integrate(t.depths[v], t.rig.intrinsics[v], t.rig.poses[v]);
  return vol;
}

double max_tsdf_difference(const TsdfVolume& a, const TsdfVolume& b) {
  const auto& d = a.dims();
  double worst = 0.0;
  for (int k = 0; k < d.z(); ++k) {
    for (int j = 0; j < d.y(); ++j) {
      for (int i = 0; i < d.x(); ++i) {
        if (a.weight(i, j, k) != b.weight(i, j, k)) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::abs(a.tsdf(i, j, k) - b.tsdf(i, j, k)));
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------- criteria

Checks ba_recovery() {
  Checks c;
  const auto scene = generate_synthetic(sphere_spec(6));
  auto matches = synthetic_tracks(scene.truth, 150, 1);
  CameraRig rig = perturb(scene.truth.rig, 77, 1.0, 0.01);
  const auto t0 = Clock::now();
  const auto rep = bundle_adjust(rig, matches);
  const double secs = seconds_since(t0);
  const double ate_exact = center_ate(rig, scene.truth.rig);
  c.note("rmse_px", rep.final_rmse);
  c.note("ate", ate_exact);
  c.note("seconds", secs);
  c.expect(rep.final_rmse < 1e-6, "reprojection rmse >= 1e-6 px");
  c.expect(ate_exact < 1e-6, "ate >= 1e-6");
  c.expect(secs < 30.0, "runtime >= 30 s");

  auto spec = sphere_spec(6);
  spec.width = 640;
  spec.height = 480;
  spec.focal = 600.0;
  const auto noisy_scene = generate_synthetic(spec);
  auto noisy = synthetic_tracks(noisy_scene.truth, 1500, 2, 0.5);
  CameraRig noisy_rig = perturb(noisy_scene.truth.rig, 78, 1.0, 0.01);
  const double before = center_ate(noisy_rig, noisy_scene.truth.rig);
  bundle_adjust(noisy_rig, noisy);
  const double after = center_ate(noisy_rig, noisy_scene.truth.rig);
  c.note("noisy_ate_gain", before / after);
  c.expect(after * 10.0 <= before, "noisy ate improved less than 10x");
  return c;
}

Checks gauge_invariance() {
  Checks c;
  const auto scene = generate_synthetic(sphere_spec(6));
  auto m1 = synthetic_tracks(scene.truth, 80, 6, 0.3);
  CameraRig r1 = perturb(scene.truth.rig, 79, 1.0, 0.01);
  std::mt19937_64 rng(8);
  const CameraPose g(random_rotation(rng, 73.0), Vec3(2.0, -1.0, 0.5));
  auto m2 = m1;
  CameraRig r2 = r1;
  for (auto& p : r2.poses) p = p * g.inverse();
  for (auto& t : m2.tracks) t.point = g.transform(t.point);
  const auto a = bundle_adjust(r1, m1);
  const auto b = bundle_adjust(r2, m2);
  double worst = 0.0;
  for (std::size_t v = 0; v < r1.size(); ++v) {
    const CameraPose expect = r1.poses[v] * g.inverse();
    worst = std::max(worst, (r2.poses[v].rotation() - expect.rotation()).norm());
    worst = std::max(worst, (r2.poses[v].translation() - expect.translation()).norm());
  }
  c.note("rmse_delta", std::abs(a.final_rmse - b.final_rmse));
  c.note("pose_delta", worst);
  c.expect(std::abs(a.final_rmse - b.final_rmse) <= 1e-9, "rmse changed by more than 1e-9");
  c.expect(worst <= 1e-9, "poses differ from the transformed solution");
  return c;
}

Checks matching_oracle() {
  Checks c;
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(1, 1000);
  int equal = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto a = random_points(rng, size(rng), 1.0 + inst * 0.1);
    const auto b = random_points(rng, size(rng), 1.0);
    equal += reciprocal_nearest_neighbors(a, b) == brute_reciprocal(a, b);
  }
  c.note("instances_equal", equal);
  c.expect(equal == 50, "reciprocal matches differ from brute force");

  std::mt19937_64 prng(24);
  const auto pts = random_points(prng, 400);
  const std::vector<PointMapFrame> frames{grid_frame(pts, 20, 5.0), grid_frame(pts, 20, 5.0)};
  std::vector<Raster<double>> sec(2, Raster<double>(20, 20, 1.0));
  std::set<int> planted;
  for (int i = 0; i < 400; i += 5) {
    sec[i % 2][i] = 0.049;
    planted.insert(i);
  }
  const auto m = extract_matches(frames, sec, {{0, 1}});
  std::size_t survivors = 0;
  for (const auto& t : m.tracks) {
    for (const auto& o : t.observations) survivors += planted.count(o.cell);
  }
  c.note("planted_surviving", static_cast<double>(survivors));
  c.expect(survivors == 0, "planted low-confidence matches survived");
  c.expect(m.size() == 400u - planted.size(), "clean matches were lost");
  return c;
}

Checks scale_correction() {
  Checks c;
  const auto d0 = wavy_depth(80, 60);
  ScaleCorrectionConfig cfg;
  cfg.window = 25;
  cfg.stride = 1;
  cfg.eps_edge = cfg.eps_smooth = 1e-7;
  double worst = 0.0;
  for (double a : {0.5, 2.0}) {
    for (double b : {0.0, 1.0}) worst = std::max(worst, max_rel_error(scale_correct(affine(d0, a, b), d0, cfg), d0));
  }
  c.note("max_rel_error", worst);
  c.expect(worst < 1e-4, "affine family not undone within 1e-4");

  DepthMap flat(30, 30), d(30, 30);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 30; ++x) {
      flat.set(x, y, 2.5);
      d.set(x, y, u(rng));
    }
  }
  const auto out = scale_correct(d, flat, cfg);
  bool exact = true;
  for (std::size_t i = 0; i < out.depth.size(); ++i) exact = exact && out.depth[i] == 2.5;
  c.expect(exact, "constant reference window is not reproduced exactly");
  return c;
}

Checks aggregation() {
  Checks c;
  const auto d0 = wavy_depth(20, 15);
  const double m = d0.mean_valid();
  const auto edge = aggregate_candidates({affine(d0, 1.0, 0.2499 * m), affine(d0, 1.0, 0.2501 * m)}, d0);
  c.expect(edge.accepted[0] && !edge.accepted[1], "candidate beyond 0.25 normalized rms not rejected");

  DepthMap ref(2, 2), a(2, 2), b(2, 2), d(2, 2);
  const double base[4] = {2.0, 2.5, 3.0, 3.5};
  for (int i = 0; i < 4; ++i) {
    ref.set(i % 2, i / 2, base[i]);
    a.set(i % 2, i / 2, base[i] + 0.1);
    b.set(i % 2, i / 2, base[i] - 0.2);
    d.set(i % 2, i / 2, base[i] + 0.4);
  }
  const auto r = aggregate_candidates({a, b, d}, ref);
  bool averaged = r.accepted_count() == 3;
  for (int i = 0; i < 4 && averaged; ++i) {
    const double expect = ((base[i] - 0.2) + (base[i] + 0.1) + (base[i] + 0.4)) / 3.0;
    averaged = std::abs(r.depth.depth[i] - expect) <= 4.0 * std::numeric_limits<double>::epsilon() * expect;
  }
  c.expect(averaged, "in-threshold candidates not averaged exactly");

  const auto fb = aggregate_candidates({affine(d0, 2.0, 0.0), affine(d0, 0.2, 0.0)}, d0);
  c.expect(fb.fell_back && fb.depth.depth == d0.depth, "no fallback to the reference when all rejected");
  return c;
}

Checks refinement() {
  Checks c;
  SyntheticSceneSpec spec;
  spec.surface = SurfaceKind::kHeightfield;
  const auto scene = generate_synthetic(spec);
  const auto& gt = scene.truth.depths[0];
  DepthMap d0(gt.width(), gt.height());
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      double s = 0.0;
      int n = 0;
      for (int dy = -3; dy <= 3; ++dy) {
        for (int dx = -3; dx <= 3; ++dx) {
          if (gt.is_valid(x + dx, y + dy)) {
            s += gt.depth(x + dx, y + dy);
            ++n;
          }
        }
      }
      if (gt.is_valid(x, y) && n) d0.set(x, y, s / n);
    }
  }
  RefinedDepthProvider provider;
  provider.targets = scene.truth.depths;
  provider.oracle.detail_gain = 0.5;
  provider.oracle.detail_noise = 0.002;
  provider.oracle.drift_scale = 1.1;
  provider.oracle.drift_offset = 0.05 * d0.mean_valid();
  const auto r = refine_view(0, d0, scene.truth.rig.intrinsics[0], provider);
  const double before = rmse(d0, gt), after = rmse(r.depth, gt);
  const double drift = std::abs(r.depth.mean_valid() - d0.mean_valid()) / d0.mean_valid();
  c.note("rmse_d0", before);
  c.note("rmse_refined", after);
  c.note("mean_drift", drift);
  c.expect(after < before, "refined depth is not closer to ground truth");
  c.expect(drift < 0.01, "mean depth drifted by 1% or more");
  return c;
}

Checks renderer() {
  Checks c;
  const auto k = intrinsics(40, 30, 50.0);
  SplatScene plane;
  plane.primitives.push_back(disk(Vec3(0.05, -0.03, 2.0), Vec3(0, 0, 1), 0.6, 1.0, Vec3(0.9, 0.4, 0.1)));
  const auto out = render(plane, k, CameraPose::identity());
  double worst = 0.0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < out.depth.depth.size(); ++i) {
    if (!out.depth.valid[i]) continue;
    ++covered;
    worst = std::max(worst, std::abs(out.depth.depth[i] - 2.0));
  }
  c.note("plane_depth_error", worst);
  c.expect(covered > 200 && worst <= 1e-6, "planar primitive depth off its plane");

  const auto k2 = intrinsics(21, 21, 30.0);
  SplatScene two;
  two.background = Vec3(0.2, 0.6, 1.0);
  const Vec3 c1(1.0, 0.0, 0.25), c2(0.0, 0.5, 0.75);
  two.primitives.push_back(disk(Vec3(0, 0, 2.0), Vec3(0, 0, 1), 0.1, 0.5, c2));
  two.primitives.push_back(disk(Vec3(0, 0, 1.0), Vec3(0, 0, 1), 0.05, 0.5, c1));
  const auto blend = render(two, k2, CameraPose::identity());
  c.expect(blend.color(10, 10) == Vec3(0.5 * c1 + 0.25 * c2 + 0.25 * two.background) && blend.alpha(10, 10) == 0.75,
           "two-primitive blend differs from the closed form");

  const auto k3 = intrinsics(48, 36, 50.0);
  auto scene = random_scene(300, 5);
  for (int i = 0; i < 20; ++i) {
    auto g = scene.primitives[i];
    g.color = Vec3(0.5, 0.5, 0.5);
    scene.primitives.push_back(g);
  }
  const CameraPose pose = look_at(Vec3(0.2, -0.1, -0.5), Vec3(0, 0, 3), Vec3(0, -1, 0));
  const auto ref = render(scene, k3, pose);
  std::mt19937 rng(9);
  bool identical = true;
  for (int trial = 0; trial < 3; ++trial) {
    std::shuffle(scene.primitives.begin(), scene.primitives.end(), rng);
    const auto p = render(scene, k3, pose);
    identical = identical && p.color == ref.color && p.alpha == ref.alpha && p.depth.depth == ref.depth.depth &&
                p.normal.normals == ref.normal.normals;
  }
  c.expect(identical, "storage-order permutation changed the image");
  return c;
}

Checks loss_suite() {
  Checks c;
  const auto f = depth_fixture();
  Lcg img_rng(7);
  const auto img = random_image(img_rng);
  Lcg cyc_rng(3);
  const auto k16 = intrinsics(16, 12, 20.0);
  DepthMap cyc(16, 12);
  for (std::size_t i = 0; i < cyc.depth.size(); ++i) cyc.set(static_cast<int>(i % 16), static_cast<int>(i / 16), 2.0 + cyc_rng());
  const CameraPose p = look_at(Vec3(1, 2, -3), Vec3::Zero(), Vec3(0, -1, 0));
  const double zeros[] = {
      depth_loss(f.dstar, f.d0, f.dstar, f.sky),
      normal_loss(random_normals(2), random_normals(2)),
      ndc_loss(constant_depth(8, 6, 2.0), constant_normals(8, 6, Vec3(0.3, 0.1, -1)), intrinsics(8, 6, 10.0)),
      cycle_loss(cyc, k16, p, cyc, k16, p).loss,
      photometric_loss(img, img, 0.2),
      total_loss({}).total,
  };
  double worst_zero = 0.0;
  for (double z : zeros) worst_zero = std::max(worst_zero, std::abs(z));
  c.note("max_self_consistent", worst_zero);
  c.expect(worst_zero <= 1e-15, "a loss is nonzero on its self-consistent fixture");

  auto nd = random_normals(3);
  nd.valid(0, 3) = 0;
  Lcg ndc_rng(4);
  DepthMap dn(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) dn.set(x, y, (x < 2 ? 2.0 : 2.5) + 0.05 * ndc_rng());
  }
  const auto k = fixture_k();
  const CameraPose pb = CameraPose::from_center(Mat3::Identity(), Vec3(0.2, 0, 0));
  DepthMap single(4, 4);
  single.set(2, 1, 2.0);
  Lcg rc(6);
  DepthMap da(4, 4), db(4, 4);
  for (int i = 0; i < 16; ++i) da.set(i % 4, i / 4, 2.0 + 0.3 * rc());
  for (int i = 0; i < 16; ++i) db.set(i % 4, i / 4, 2.0 + 0.3 * rc());
  Lcg rp(7);
  RgbImage pa(4, 4), pbi(4, 4);
  for (int i = 0; i < 16; ++i) {
    const double a0 = rp(), a1 = rp(), a2 = rp();
    const double b0 = rp(), b1 = rp(), b2 = rp();
    pa[i] = Vec3(a0, a1, a2);
    pbi[i] = Vec3(b0, b1, b2);
  }
  const std::pair<double, double> oracle[] = {
      {depth_loss(f.dstar, f.d0, f.rendered, f.sky), 0.09093958278582386},
      {normal_loss(random_normals(2), nd), 0.6724119338177911},
      {ndc_loss(dn, random_normals(5), k), 0.09359436839454909},
      {cycle_loss(single, k, CameraPose::identity(), constant_depth(4, 4, 2.1), k, pb).loss, 0.00036281179138321736},
      {cycle_loss(da, k, CameraPose::identity(), db, k, pb).loss, 0.0005049219056157811},
      {photometric_loss(pa, pbi, 0.2), 0.4907804530503168},
  };
  double worst_oracle = 0.0;
  for (const auto& [got, want] : oracle) worst_oracle = std::max(worst_oracle, std::abs(got - want));
  c.note("max_oracle_error", worst_oracle);
  c.expect(worst_oracle <= 1e-6, "a loss differs from its oracle by more than 1e-6");

  const LossComponents comp{0.37, 1.9, 0.052, 3.3e-3, 0.41};
  c.expect(total_loss(comp).total == 0.005 * 0.37 + 0.005 * 1.9 + 0.1 * 0.052 + 0.1 * 3.3e-3 + 0.41,
           "total loss is not the weighted sum");
  return c;
}

Checks cycle_consistency() {
  Checks c;
  SyntheticSceneSpec spec;
  spec.surface = SurfaceKind::kHeightfield;
  spec.views = 8;
  spec.width = 320;
  spec.height = 240;
  spec.focal = 320.0;
  const auto scene = generate_synthetic(spec);
  const auto& t = scene.truth;
  const auto ab =
      cycle_loss(t.depths[0], t.rig.intrinsics[0], t.rig.poses[0], t.depths[1], t.rig.intrinsics[1], t.rig.poses[1]);
  const auto ba =
      cycle_loss(t.depths[1], t.rig.intrinsics[1], t.rig.poses[1], t.depths[0], t.rig.intrinsics[0], t.rig.poses[0]);
  c.note("loss_ab", ab.loss);
  c.note("loss_ba", ba.loss);
  c.note("round_trips", static_cast<double>(ab.round_trips));
  c.expect(ab.round_trips > 0 && ba.round_trips > 0, "no overlapping pixels");
  c.expect(ab.loss < 1e-6 && ba.loss < 1e-6, "cycle loss >= 1e-6 px^2");
  return c;
}

Checks meshing() {
  Checks c;
  const auto scene = generate_synthetic(sphere_spec(20));
  std::vector<int> order(20);
  for (int v = 0; v < 20; ++v) order[v] = v;
  const auto vol = fuse_sphere(scene, 0.02, order);
  const auto mesh = vol.extract_mesh();
  double sum = 0.0;
  for (const auto& v : mesh.vertices) sum += std::abs(v.norm() - 1.0);
  const double mean = mesh.vertices.empty() ? std::numeric_limits<double>::infinity() : sum / mesh.vertices.size();
  c.note("vertices", static_cast<double>(mesh.vertices.size()));
  c.note("mean_radial_error", mean);
  c.expect(mean < 0.02, "mean radial vertex error >= 0.02");

  std::mt19937_64 rng(12);
  std::shuffle(order.begin(), order.end(), rng);
  const double diff = max_tsdf_difference(vol, fuse_sphere(scene, 0.02, order));
  c.note("permutation_tsdf_delta", diff);
  c.expect(diff <= 1e-12, "view order changed the volume");
  return c;
}

Checks metrics() {
  Checks c;
  std::mt19937_64 rng(2);
  bool exact = true;
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_points(rng, 100 + trial * 80), b = random_points(rng, 1000 - trial * 80);
    exact = exact && chamfer(a, b) == 0.5 * (brute_mean_nn(a, b) + brute_mean_nn(b, a));
    const double tau = 0.05 + 0.02 * trial;
    const auto s = f1_score(a, b, tau);
    exact = exact && s.precision == brute_within(a, b, tau) && s.recall == brute_within(b, a, tau);
  }
  c.expect(exact, "chamfer or F1 differs from brute force");

  std::vector<Vec3> gt;
  for (int i = 0; i < 6; ++i) {
    const double t = i * std::numbers::pi / 3.0;
    gt.emplace_back(3 * std::cos(t), 0.5, 3 * std::sin(t));
  }
  auto est = gt;
  est[1] += Vec3(0.05, 0.1, -0.02);
  const double base = ate(est, gt);
  double worst = 0.0;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const SimilarityTransform s(std::exp(n(rng)), so3_exp(Vec3(n(rng), n(rng), n(rng))),
                                Vec3(n(rng), n(rng), n(rng)) * 5.0);
    std::vector<Vec3> moved;
    for (const auto& p : est) moved.push_back(s(p));
    worst = std::max(worst, std::abs(ate(moved, gt) - base));
  }
  c.note("ate_sim3_delta", worst);
  c.expect(worst <= 1e-10, "ate changed under a similarity transform");

  const RgbImage a(16, 12, Vec3(0.2, 0.4, 0.6)), b(16, 12, Vec3(0.3, 0.5, 0.7));
  const double db = psnr(a, b);
  c.note("psnr_offset", db);
  c.expect(std::abs(db - 20.0) <= 1e-9, "psnr of a 0.1 offset is not 20 dB");
  return c;
}

Checks full_pipeline(const std::filesystem::path& work) {
  namespace fs = std::filesystem;
  Checks c;
  PipelineConfig cfg;
  cfg.seed = 1;
  cfg.verbosity = "quiet";
  std::string manifests[2];
  double chamfer_voxels = std::numeric_limits<double>::infinity();
  for (int run = 0; run < 2; ++run) {
    const fs::path out = work / ("run" + std::to_string(run));
    fs::remove_all(out);
    const auto t0 = Clock::now();
    const auto res = run_pipeline(cfg, Workspace{{}, out, {}});
    const double secs = seconds_since(t0);
    c.note("seconds_run" + std::to_string(run), secs);
    c.expect(res.exit_code == 0, "pipeline failed in stage " + res.failed_stage + ": " + res.message);
    c.expect(secs < 300.0, "pipeline took 5 min or longer");
    if (res.exit_code != 0) return c;
    manifests[run] = read_file(out / "manifest.json");
    const auto report = nlohmann::json::parse(read_file(out / "eval" / "eval_report.json"));
    chamfer_voxels = report.value("chamfer_voxels", chamfer_voxels);
  }
  c.note("chamfer_voxels", chamfer_voxels);
  c.expect(manifests[0] == manifests[1], "manifests differ between runs with the same seed");
  c.expect(chamfer_voxels < 2.0, "mesh chamfer is 2 voxels or more");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_work";
  const std::vector<std::pair<std::string, std::function<Checks()>>> criteria{
      {"ba recovery", ba_recovery},
      {"gauge invariance", gauge_invariance},
      {"matching oracle", matching_oracle},
      {"scale correction", scale_correction},
      {"aggregation", aggregation},
      {"refinement", refinement},
      {"renderer", renderer},
      {"loss suite", loss_suite},
      {"cycle consistency", cycle_consistency},
      {"meshing", meshing},
      {"metrics", metrics},
      {"full pipeline", [&] { return full_pipeline(work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Checks c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    failed += !c.ok();
    std::printf("AC%zu %s %s: %s\n", i + 1, c.ok() ? "PASS" : "FAIL", criteria[i].first.c_str(), c.summary().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
