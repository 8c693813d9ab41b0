#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gbr/eval/metrics.hpp"
#include "gbr/io/synthetic.hpp"

using namespace gbr;

namespace {

std::vector<Vec3> random_cloud(std::mt19937_64& rng, int n, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng));
  return p;
}

double brute_mean_nn(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double s = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) best = std::min(best, squared_distance(p, q));
    s += std::sqrt(best);
  }
  return s / static_cast<double>(a.size());
}

Raster<double> fixture_channel(int w, int h, double phase, bool second) {
  Raster<double> r(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      r(x, y) = second ? 0.5 + 0.25 * std::sin(0.6 * x + 1.4 * y + phase) + 0.12 * std::sin(0.5 * x - 0.2 * y)
                       : 0.5 + 0.3 * std::sin(0.7 * x + 1.3 * y + phase) + 0.1 * std::cos(0.37 * x * y);
    }
  }
  return r;
}

std::vector<Vec3> ring_centers() {
  std::vector<Vec3> c;
  for (int i = 0; i < 6; ++i) {
    const double t = i * std::numbers::pi / 3.0;
    c.emplace_back(3 * std::cos(t), 0.5, 3 * std::sin(t));
  }
  return c;
}

}  // namespace

TEST(Chamfer, IdenticalSetsGiveZero) {
  std::mt19937_64 rng(1);
  const auto a = random_cloud(rng, 200);
  EXPECT_EQ(chamfer(a, a), 0.0);
}

TEST(Chamfer, SinglePointsUnitApart) {
  EXPECT_DOUBLE_EQ(chamfer({Vec3(0, 0, 0)}, {Vec3(1, 0, 0)}), 1.0);
}

TEST(Chamfer, EqualsBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_cloud(rng, 100 + trial * 40), b = random_cloud(rng, 1000 - trial * 40);
    EXPECT_EQ(chamfer(a, b), 0.5 * (brute_mean_nn(a, b) + brute_mean_nn(b, a)));
  }
}

TEST(Chamfer, Symmetric) {
  std::mt19937_64 rng(3);
  const auto a = random_cloud(rng, 300), b = random_cloud(rng, 500);
  EXPECT_EQ(chamfer(a, b), chamfer(b, a));
}

TEST(Chamfer, EmptyThrows) {
  EXPECT_THROW(chamfer({}, {Vec3::Zero()}), EmptyResultError);
}

TEST(F1, IdenticalSets) {
  std::mt19937_64 rng(4);
  const auto a = random_cloud(rng, 100);
  const auto s = f1_score(a, a, 0.01);
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 1.0);
}

TEST(F1, DisjointFarSets) {
  const auto s = f1_score({Vec3(0, 0, 0)}, {Vec3(10, 0, 0)}, 0.1);
  EXPECT_EQ(s.precision, 0.0);
  EXPECT_EQ(s.recall, 0.0);
  EXPECT_EQ(s.f1, 0.0);
}

TEST(F1, HalfPrecisionFullRecall) {
  const std::vector<Vec3> gt{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const std::vector<Vec3> pred{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(5, 0, 0), Vec3(6, 0, 0)};
  const auto s = f1_score(pred, gt, 0.1);
  EXPECT_EQ(s.precision, 0.5);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
}

TEST(F1, EqualsBruteForceAndSwapsUnderExchange) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_cloud(rng, 400), b = random_cloud(rng, 600);
    const double tau = 0.05 + 0.01 * trial;
    auto within = [&](const std::vector<Vec3>& q, const std::vector<Vec3>& t) {
      int n = 0;
      for (const auto& p : q) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& x : t) best = std::min(best, squared_distance(p, x));
        n += std::sqrt(best) <= tau;
      }
      return static_cast<double>(n) / static_cast<double>(q.size());
    };
    const auto s = f1_score(a, b, tau);
    EXPECT_EQ(s.precision, within(a, b));
    EXPECT_EQ(s.recall, within(b, a));
    const auto r = f1_score(b, a, tau);
    EXPECT_EQ(r.precision, s.recall);
    EXPECT_EQ(r.recall, s.precision);
  }
}

TEST(F1, NonPositiveThresholdRejected) {
  EXPECT_THROW(f1_score({Vec3::Zero()}, {Vec3::Zero()}, 0.0), ConfigError);
}

TEST(Ate, IdenticalIsZero) {
  const auto c = ring_centers();
  EXPECT_NEAR(ate(c, c), 0.0, 1e-12);
}

TEST(Ate, InvariantUnderSimilarity) {
  std::mt19937_64 rng(6);
  auto c = ring_centers();
  c[1] += Vec3(0.05, 0.1, -0.02);
  const auto gt = ring_centers();
  const double base = ate(c, gt);
  for (int trial = 0; trial < 10; ++trial) {
    std::normal_distribution<double> n(0.0, 1.0);
    const Mat3 r = so3_exp(Vec3(n(rng), n(rng), n(rng)));
    const SimilarityTransform s(std::exp(n(rng)), r, Vec3(n(rng), n(rng), n(rng)) * 5.0);
    std::vector<Vec3> moved;
    for (const auto& p : c) moved.push_back(s(p));
    EXPECT_NEAR(ate(moved, gt), base, 1e-10);
  }
  std::vector<Vec3> exact;
  const SimilarityTransform s(2.5, so3_exp(Vec3(0.3, -0.2, 1.0)), Vec3(1, 2, 3));
  for (const auto& p : gt) exact.push_back(s(p));
  EXPECT_NEAR(ate(exact, gt), 0.0, 1e-12);
}

TEST(Ate, OneDisplacedCameraMatchesOracle) {
  auto est = ring_centers();
  est[2] += Vec3(0.1, -0.05, 0.02);
  EXPECT_NEAR(ate(est, ring_centers()), 0.03699097789296668, 1e-12);
}

TEST(Ate, TooFewPosesThrows) {
  EXPECT_THROW(ate(std::vector<Vec3>{Vec3::Zero()}, std::vector<Vec3>{Vec3::Zero()}), NumericalError);
}

TEST(Psnr, IdenticalIsExact) {
  RgbImage a(8, 6, Vec3(0.2, 0.4, 0.6));
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EvalReport r;
  r.psnr = psnr(a, a);
  EXPECT_EQ(r.to_json()["psnr"], "exact");
}

TEST(Psnr, UniformOffsetGivesTwentyDb) {
  RgbImage a(16, 12, Vec3(0.2, 0.4, 0.6)), b(16, 12, Vec3(0.3, 0.5, 0.7));
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Ssim, IdenticalIsOne) {
  const auto a = fixture_channel(20, 15, 0.0, false);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, MatchesOracle) {
  const auto a = fixture_channel(32, 24, 0.0, false), b = fixture_channel(32, 24, 0.0, true);
  EXPECT_NEAR(ssim(a, b), 0.4006788497340272, 1e-6);
  const auto m = detail::ssim_map(a, b, {});
  double s = 0.0;
  int n = 0;
  for (int y = 5; y < 19; ++y) {
    for (int x = 5; x < 27; ++x) {
      s += m(x, y);
      ++n;
    }
  }
  EXPECT_NEAR(s / n, 0.5926038900239319, 1e-6);
  const auto a4 = fixture_channel(4, 4, 0.3, false), b4 = fixture_channel(4, 4, 0.3, true);
  EXPECT_NEAR(ssim(a4, b4), 0.8445165081028032, 1e-6);
}

TEST(SampleMesh, PointsLieOnSurfaceAndCoverIt) {
  SyntheticSceneSpec spec;
  const auto scene = generate_synthetic(spec);
  const auto pts = sample_mesh(scene.truth.mesh, 5000, 7);
  ASSERT_EQ(pts.size(), 5000u);
  double worst = 0.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) {
    worst = std::max(worst, std::abs(p.norm() - 1.0));
    mean += p;
  }
  EXPECT_LT(worst, 0.01);
  EXPECT_LT((mean / 5000.0).norm(), 0.05);
  EXPECT_EQ(sample_mesh(scene.truth.mesh, 100, 7), sample_mesh(scene.truth.mesh, 100, 7));
}

TEST(SampleMesh, VisibilityFilterKeepsMultiViewPoints) {
  SyntheticSceneSpec spec;
  const auto scene = generate_synthetic(spec);
  const auto pts = sample_mesh(scene.truth.mesh, 4000, 8);
  const auto vis = visible_subset(pts, scene.truth.rig, scene.truth.depths, 2, 0.02);
  EXPECT_GT(vis.size(), 0u);
  EXPECT_LT(vis.size(), pts.size());
}

TEST(EvalReport, GeometryDefaultsThresholdToBoundingBox) {
  const std::vector<Vec3> gt{Vec3(0, 0, 0), Vec3(1, 1, 1)};
  const auto r = evaluate_geometry(gt, gt);
  EXPECT_EQ(*r.chamfer, 0.0);
  EXPECT_DOUBLE_EQ(r.f1_threshold, 0.01 * std::sqrt(3.0));
  EXPECT_EQ(r.f1->f1, 1.0);
  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("chamfer"));
  EXPECT_FALSE(j.contains("ate_rmse"));
}
