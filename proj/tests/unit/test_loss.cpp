#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <numbers>

#include "gbr/io/synthetic.hpp"
#include "gbr/loss/losses.hpp"
#include "gbr/loss/pseudo_view.hpp"
#include "support/fixtures.hpp"

using namespace gbr;
using namespace gbr::fixture;

TEST(DepthLoss, ZeroWhenRenderMatchesReference) {
  auto f = depth_fixture();
  EXPECT_EQ(depth_loss(f.dstar, f.d0, f.dstar, f.sky), 0.0);
}

TEST(DepthLoss, UnitWeightsGiveOffset) {
  auto f = depth_fixture();
  DepthMap shifted = f.dstar;
  for (auto& v : shifted.depth.data()) v += 0.125;
  EXPECT_NEAR(depth_loss(f.dstar, f.dstar, shifted), 0.125, 1e-15);
}

TEST(DepthLoss, MatchesOracle) {
  auto f = depth_fixture();
  EXPECT_NEAR(depth_loss(f.dstar, f.d0, f.rendered, f.sky), 0.09093958278582386, 1e-12);
}

TEST(DepthLoss, WeightsInUnitInterval) {
  auto f = depth_fixture();
  for (std::size_t i = 0; i < 16; ++i) {
    const double w = depth_weight(f.dstar.depth[i], f.d0.depth[i], 0.1);
    EXPECT_GT(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
  EXPECT_EQ(depth_weight(2.0, 2.0, 0.1), 1.0);
}

TEST(DepthLoss, PaddingWithSkyAndInvalidPixelsIsNeutral) {
  auto f = depth_fixture();
  const double ref = depth_loss(f.dstar, f.d0, f.rendered, f.sky);
  DepthMap a(7, 6), b(7, 6), c(7, 6);
  Mask sky(7, 6, 0);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 7; ++x) {
      const bool inside = x >= 2 && x < 6 && y >= 1 && y < 5;
      if (inside) {
        const int u = x - 2, v = y - 1;
        a.depth(x, y) = f.dstar.depth(u, v);
        a.valid(x, y) = f.dstar.valid(u, v);
        b.depth(x, y) = f.d0.depth(u, v);
        b.valid(x, y) = f.d0.valid(u, v);
        c.depth(x, y) = f.rendered.depth(u, v);
        c.valid(x, y) = f.rendered.valid(u, v);
        sky(x, y) = f.sky(u, v);
      } else {
        a.set(x, y, 5.0);
        b.set(x, y, 3.0);
        c.set(x, y, 9.0);
        sky(x, y) = (x + y) % 2;
        if (!sky(x, y)) c.valid(x, y) = 0;
      }
    }
  }
  EXPECT_NEAR(depth_loss(a, b, c, sky), ref, 1e-15);
}

TEST(DepthLoss, NoValidPixelThrows) {
  auto f = depth_fixture();
  Mask all(4, 4, 1);
  EXPECT_THROW(depth_loss(f.dstar, f.d0, f.rendered, all), EmptyResultError);
}

TEST(NormalLoss, ZeroWhenEqual) {
  const auto n = random_normals(2);
  EXPECT_EQ(normal_loss(n, n), 0.0);
}

TEST(NormalLoss, PlanarReferenceHasUnitWeights) {
  const auto n = constant_normals(6, 5, Vec3(0.2, -0.1, -1.0));
  const auto c = normal_consistency(n, 3);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(0.5 * (1.0 + c[i]), 1.0, 1e-15);
}

TEST(NormalLoss, MatchesOracle) {
  const auto nr = random_normals(2);
  auto nd = random_normals(3);
  nd.valid(0, 3) = 0;
  EXPECT_NEAR(normal_loss(nr, nd), 0.6724119338177911, 1e-12);
}

TEST(NormalLoss, WeightsInUnitInterval) {
  const auto c = normal_consistency(random_normals(9), 3);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_GE(0.5 * (1.0 + c[i]), 0.0);
    EXPECT_LE(0.5 * (1.0 + c[i]), 1.0);
  }
}

TEST(NormalLoss, AllInvalidThrows) {
  NormalMap a(4, 4), b(4, 4);
  EXPECT_THROW(normal_loss(a, b), EmptyResultError);
}

TEST(NdcLoss, ConstantDepthIsZero) {
  const auto k = intrinsics(8, 6, 10.0);
  EXPECT_EQ(ndc_loss(constant_depth(8, 6, 2.0), constant_normals(8, 6, Vec3(0.3, 0.1, -1)), k), 0.0);
}

TEST(NdcLoss, ConsistentPlaneRenderIsSmall) {
  const auto k = intrinsics(64, 48, 60.0);
  GaussianPrimitive g;
  g.position = Vec3(0, 0, 2.0);
  const Vec3 n = Vec3(-0.3, 0.2, 1.0).normalized();
  const Vec3 x = Vec3::UnitX().cross(n).normalized();
  Mat3 r;
  r << x, n.cross(x), n;
  g.rotation = Eigen::Quaterniond(r).normalized();
  g.scale = Vec3(1.0, 1.0, 1e-4);
  SplatScene scene;
  scene.primitives.push_back(g);
  const auto out = render(scene, k, CameraPose::identity());
  EXPECT_LT(ndc_loss(out.depth, out.normal, k), 1e-3);
}

TEST(NdcLoss, MatchesOracle) {
  Lcg r(4);
  DepthMap d(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) d.set(x, y, (x < 2 ? 2.0 : 2.5) + 0.05 * r());
  }
  EXPECT_NEAR(ndc_loss(d, random_normals(5), fixture_k()), 0.09359436839454909, 1e-12);
}

TEST(CycleLoss, IdenticalViewsGiveZero) {
  const auto k = intrinsics(16, 12, 20.0);
  Lcg r(3);
  DepthMap d(16, 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 16; ++x) d.set(x, y, 2.0 + r());
  }
  const CameraPose p = look_at(Vec3(1, 2, -3), Vec3::Zero(), Vec3(0, -1, 0));
  const auto res = cycle_loss(d, k, p, d, k, p);
  EXPECT_LT(res.loss, 1e-20);
  EXPECT_EQ(res.round_trips, 16u * 12u);
}

TEST(CycleLoss, OffsetPlaneSinglePixelMatchesOracle) {
  const auto k = fixture_k();
  DepthMap da(4, 4);
  da.set(2, 1, 2.0);
  const auto db = constant_depth(4, 4, 2.1);
  const CameraPose pb = CameraPose::from_center(Mat3::Identity(), Vec3(0.2, 0, 0));
  const auto res = cycle_loss(da, k, CameraPose::identity(), db, k, pb);
  EXPECT_EQ(res.round_trips, 1u);
  EXPECT_NEAR(res.loss, 0.00036281179138321736, 1e-12);
}

TEST(CycleLoss, RandomFixtureMatchesOracle) {
  const auto k = fixture_k();
  Lcg r(6);
  DepthMap da(4, 4), db(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) da.set(x, y, 2.0 + 0.3 * r());
  }
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) db.set(x, y, 2.0 + 0.3 * r());
  }
  const CameraPose pb = CameraPose::from_center(Mat3::Identity(), Vec3(0.2, 0, 0));
  const auto res = cycle_loss(da, k, CameraPose::identity(), db, k, pb);
  EXPECT_EQ(res.round_trips, 12u);
  EXPECT_NEAR(res.loss, 0.0005049219056157811, 1e-12);
}

TEST(CycleLoss, DepthsOfOneSurfaceAreConsistentBothWays) {
  SyntheticSceneSpec spec;
  spec.surface = SurfaceKind::kHeightfield;
  spec.views = 8;
  spec.width = 320;
  spec.height = 240;
  spec.focal = 320.0;
  const auto scene = generate_synthetic(spec);
  const auto& t = scene.truth;
  const auto ab = cycle_loss(t.depths[0], t.rig.intrinsics[0], t.rig.poses[0], t.depths[1], t.rig.intrinsics[1],
                             t.rig.poses[1]);
  const auto ba = cycle_loss(t.depths[1], t.rig.intrinsics[1], t.rig.poses[1], t.depths[0], t.rig.intrinsics[0],
                             t.rig.poses[0]);
  EXPECT_GT(ab.round_trips, 40000u);
  EXPECT_LT(ab.loss, 1e-6);
  EXPECT_LT(ba.loss, 1e-6);
}

TEST(CycleLoss, OcclusionToleranceSkipsHiddenPixels) {
  SyntheticSceneSpec spec;
  spec.views = 8;
  const auto scene = generate_synthetic(spec);
  const auto& t = scene.truth;
  const auto all = cycle_loss(t.depths[0], t.rig.intrinsics[0], t.rig.poses[0], t.depths[2], t.rig.intrinsics[2],
                              t.rig.poses[2]);
  const auto vis = cycle_loss(t.depths[0], t.rig.intrinsics[0], t.rig.poses[0], t.depths[2], t.rig.intrinsics[2],
                              t.rig.poses[2], {0.01});
  EXPECT_EQ(all.occluded, 0u);
  EXPECT_GT(vis.occluded, 100u);
  EXPECT_EQ(vis.round_trips + vis.occluded, all.round_trips);
  EXPECT_LT(vis.loss, 0.01 * all.loss);
}

TEST(CycleLoss, NoOverlapThrows) {
  const auto k = intrinsics(8, 6, 10.0);
  const auto d = constant_depth(8, 6, 2.0);
  const CameraPose away = look_at(Vec3(0, 0, 0), Vec3(0, 0, -1), Vec3(0, -1, 0));
  EXPECT_THROW(cycle_loss(d, k, CameraPose::identity(), d, k, away), EmptyResultError);
}

TEST(PhotometricLoss, IdenticalIsZero) {
  Lcg r(7);
  const auto a = random_image(r);
  EXPECT_NEAR(photometric_loss(a, a, 0.2), 0.0, 1e-15);
}

TEST(PhotometricLoss, UniformOffsetPureL1) {
  Lcg r(8);
  auto a = random_image(r);
  for (auto& v : a.data()) v *= 0.8;
  auto b = a;
  for (auto& v : b.data()) v.array() += 0.1;
  EXPECT_NEAR(photometric_loss(a, b, 0.0), 0.1, 1e-12);
}

TEST(PhotometricLoss, MatchesOracle) {
  Lcg r(7);
  RgbImage a(4, 4), b(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const double a0 = r(), a1 = r(), a2 = r();
      const double b0 = r(), b1 = r(), b2 = r();
      a(x, y) = Vec3(a0, a1, a2);
      b(x, y) = Vec3(b0, b1, b2);
    }
  }
  EXPECT_NEAR(photometric_loss(a, b, 0.2), 0.4907804530503168, 1e-12);
}

TEST(TotalLoss, ZeroComponentsGiveZero) {
  EXPECT_EQ(total_loss({}).total, 0.0);
}

TEST(TotalLoss, UnitComponentsGiveWeightSum) {
  const LossComponents c{1.0, 1.0, 1.0, 1.0, 1.0};
  const auto b = total_loss(c);
  EXPECT_EQ(b.total, 0.005 + 0.005 + 0.1 + 0.1 + 1.0);
  EXPECT_NEAR(b.total, 1.21, 1e-15);
}

TEST(TotalLoss, ReproducesWeightedSumExactly) {
  const LossComponents c{0.37, 1.9, 0.052, 3.3e-3, 0.41};
  const auto b = total_loss(c);
  EXPECT_EQ(b.total, 0.005 * 0.37 + 0.005 * 1.9 + 0.1 * 0.052 + 0.1 * 3.3e-3 + 0.41);
  EXPECT_EQ(b.weighted.normal, 0.005 * 0.37);
  EXPECT_EQ(b.weighted.cycle, 0.1 * 3.3e-3);
}

TEST(TotalLoss, PseudoViewIsHalved) {
  const LossComponents c{0.37, 1.9, 0.052, 3.3e-3, 0.41};
  EXPECT_EQ(total_loss(c, {}, true).total, 0.5 * total_loss(c).total);
}

TEST(Supervision, ConfigValidation) {
  SupervisionConfig cfg;
  cfg.normal_window = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda_pho = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda3 = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PseudoView, MidpointOfEqualRotations) {
  const Mat3 r = look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3(0, -1, 0)).rotation();
  const CameraPose a(r, Vec3(0.2, -0.4, 3.0)), b(r, Vec3(1.0, 0.6, 2.0));
  const auto m = interpolate_pose(a, b, 0.5);
  EXPECT_TRUE(m.translation().isApprox(0.5 * (a.translation() + b.translation()), 1e-12));
  EXPECT_LT((m.rotation() - r).norm(), 1e-12);
}

TEST(PseudoView, InterpolationHitsEndpointsAndHalvesAngle) {
  const CameraPose a = look_at(Vec3(3, 0, 0), Vec3::Zero(), Vec3(0, 0, 1));
  const CameraPose b = look_at(Vec3(0, 3, 0), Vec3::Zero(), Vec3(0, 0, 1));
  EXPECT_LT((interpolate_pose(a, b, 0.0).rotation() - a.rotation()).norm(), 1e-12);
  EXPECT_LT((interpolate_pose(a, b, 1.0).center() - b.center()).norm(), 1e-12);
  const auto m = interpolate_pose(a, b, 0.5);
  EXPECT_NEAR(rotation_angle(a.rotation(), m.rotation()), 0.5 * rotation_angle(a.rotation(), b.rotation()), 1e-12);
}

TEST(PseudoView, IdenticalSourcesFuseToThemselves) {
  const auto d = constant_depth(5, 4, 2.75);
  const auto f = fuse_pseudo_depth(d, d, d, 0.02);
  EXPECT_TRUE(f.depth == d.depth);
  EXPECT_TRUE(f.valid == d.valid);
}

TEST(PseudoView, DeviatingSourceIsExcluded) {
  const auto dw = constant_depth(3, 3, 2.0);
  const auto dn1 = constant_depth(3, 3, 2.2);
  const auto dn2 = constant_depth(3, 3, 2.02);
  const auto f = fuse_pseudo_depth(dn1, dn2, dw, 0.02);
  EXPECT_NEAR(f.depth(1, 1), 0.5 * (2.02 + 2.0), 1e-15);
  DepthMap none(3, 3);
  const auto g = fuse_pseudo_depth(dn1, dn2, none, 0.02);
  EXPECT_EQ(g.valid_count(), 0u);
  const auto h = fuse_pseudo_depth(dn2, dn2, none, 0.02);
  EXPECT_EQ(h.depth(0, 0), 2.02);
}

TEST(PseudoView, ForwardWarpReproducesSurfaceDepth) {
  SyntheticSceneSpec spec;
  const auto scene = generate_synthetic(spec);
  const auto& t = scene.truth;
  const auto warped = forward_warp_depth(t.depths[0], t.rig.intrinsics[0], t.rig.poses[0], t.rig.intrinsics[0],
                                         t.rig.poses[0]);
  EXPECT_TRUE(warped.valid == t.depths[0].valid);
  for (std::size_t i = 0; i < warped.depth.size(); ++i) {
    if (warped.valid[i]) EXPECT_NEAR(warped.depth[i], t.depths[0].depth[i], 1e-12 * t.depths[0].depth[i]);
  }
}

TEST(PseudoView, SynthesizedDepthMatchesSurface) {
  SyntheticSceneSpec spec;
  spec.views = 8;
  const auto scene = generate_synthetic(spec);
  const auto& t = scene.truth;
  std::vector<Vec3> cloud;
  for (std::size_t v = 0; v < t.rig.size(); ++v) {
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        if (t.depths[v].is_valid(x, y)) {
          cloud.push_back(unproject(Vec2(x, y), t.depths[v].depth(x, y), t.rig.intrinsics[v], t.rig.poses[v]));
        }
      }
    }
  }
  SupervisionConfig cfg;
  cfg.pseudo_view_count = 2;
  const auto set = synthesize_pseudo_views(t.rig, t.depths, cloud, SplatScene{}, cfg);
  ASSERT_EQ(set.views.size(), 2u * 7u);
  for (const auto& pv : set.views) {
    EXPECT_EQ(pv.weight, 0.5);
    EXPECT_TRUE(pv.rgb.empty());
    std::size_t n = 0;
    double worst = 0.0;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        if (!pv.depth.is_valid(x, y)) continue;
        const Vec3 p = unproject(Vec2(x, y), pv.depth.depth(x, y), pv.intrinsics, pv.pose);
        worst = std::max(worst, std::abs(p.norm() - 1.0));
        ++n;
      }
    }
    EXPECT_GT(n, 1000u);
    EXPECT_LT(worst, 0.02);
  }
}

TEST(PseudoView, NonOverlappingNeighboursAreDropped) {
  CameraRig rig;
  const auto k = intrinsics(8, 6, 10.0);
  rig.intrinsics = {k, k};
  rig.poses = {CameraPose::identity(), CameraPose(Mat3(Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitY())), Vec3(0, 0, -10))};
  std::vector<DepthMap> depths{constant_depth(8, 6, 2.0), constant_depth(8, 6, 2.0)};
  SupervisionConfig cfg;
  cfg.pseudo_view_count = 1;
  std::vector<Vec3> cloud{Vec3(0, 0, 2.0)};
  const auto set = synthesize_pseudo_views(rig, depths, cloud, SplatScene{}, cfg);
  EXPECT_TRUE(set.views.empty());
  EXPECT_EQ(set.warnings.size(), 1u);
}
