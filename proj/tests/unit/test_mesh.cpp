#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "gbr/io/synthetic.hpp"
#include "gbr/mesh/tsdf.hpp"

using namespace gbr;

namespace {

CameraIntrinsics intrinsics(int w, int h, double f) {
  CameraIntrinsics k;
  k.width = w;
  k.height = h;
  k.fx = k.fy = f;
  k.cx = 0.5 * (w - 1);
  k.cy = 0.5 * (h - 1);
  return k;
}

DepthMap constant_depth(int w, int h, double d) {
  DepthMap out(w, h);
  out.depth.fill(d);
  out.valid.fill(1);
  return out;
}

bool same_volume(const TsdfVolume& a, const TsdfVolume& b, double tol) {
  const auto& d = a.dims();
  for (int k = 0; k < d.z(); ++k) {
    for (int j = 0; j < d.y(); ++j) {
      for (int i = 0; i < d.x(); ++i) {
        if (a.weight(i, j, k) != b.weight(i, j, k)) return false;
        if (std::abs(a.tsdf(i, j, k) - b.tsdf(i, j, k)) > tol) return false;
      }
    }
  }
  return true;
}

struct SphereFusion {
  SyntheticScene scene;
  TsdfVolume volume;
};

SphereFusion fuse_sphere(int views, double voxel, const std::vector<int>& order = {}) {
  SyntheticSceneSpec spec;
  spec.views = views;
  SphereFusion f{generate_synthetic(spec), {}};
  f.volume = TsdfVolume::from_bounds(Vec3::Constant(-1.0), Vec3::Constant(1.0), voxel, 5.0 * voxel);
  const auto& t = f.scene.truth;
  std::vector<int> idx = order;
  if (idx.empty()) {
    for (int v = 0; v < views; ++v) idx.push_back(v);
  }
  for (int v : idx) f.volume.integrate(t.depths[v], t.rig.intrinsics[v], t.rig.poses[v]);
  return f;
}

}  // namespace

TEST(Tsdf, FrontoParallelPlaneZeroCrossing) {
  const auto k = intrinsics(64, 48, 60.0);
  const double voxel = 0.02;
  auto vol = TsdfVolume::from_bounds(Vec3(-0.3, -0.3, 1.7), Vec3(0.3, 0.3, 2.3), voxel, 5 * voxel);
  vol.integrate(constant_depth(64, 48, 2.0), k, CameraPose::identity());
  const Vec3 c = vol.origin();
  const int i = static_cast<int>(std::lround(-c.x() / voxel)), j = static_cast<int>(std::lround(-c.y() / voxel));
  int crossings = 0;
  for (int kz = 0; kz + 1 < vol.dims().z(); ++kz) {
    const double a = vol.tsdf(i, j, kz), b = vol.tsdf(i, j, kz + 1);
    if (vol.weight(i, j, kz) == 0.0 || vol.weight(i, j, kz + 1) == 0.0) continue;
    if ((a >= 0.0) == (b >= 0.0)) continue;
    ++crossings;
    const double z0 = vol.center(i, j, kz).z();
    const double z = z0 + voxel * a / (a - b);
    EXPECT_LE(std::abs(z - 2.0), 0.5 * voxel);
  }
  EXPECT_EQ(crossings, 1);
}

TEST(Tsdf, ValuesAreBoundedAndWeightsMarkObservation) {
  const auto k = intrinsics(32, 24, 30.0);
  auto vol = TsdfVolume::from_bounds(Vec3(-1, -1, 1), Vec3(1, 1, 3), 0.05, 0.15);
  vol.integrate(constant_depth(32, 24, 2.0), k, CameraPose::identity());
  std::size_t observed = 0, behind = 0;
  for (int kz = 0; kz < vol.dims().z(); ++kz) {
    for (int j = 0; j < vol.dims().y(); ++j) {
      for (int i = 0; i < vol.dims().x(); ++i) {
        EXPECT_LE(std::abs(vol.tsdf(i, j, kz)), 1.0);
        if (vol.weight(i, j, kz) > 0.0) {
          ++observed;
          EXPECT_LE(vol.center(i, j, kz).z(), 2.0 + 0.15 + 1e-12);
        } else if (vol.center(i, j, kz).z() > 2.2 && std::abs(vol.center(i, j, kz).x()) < 0.5) {
          ++behind;
        }
      }
    }
  }
  EXPECT_GT(observed, 1000u);
  EXPECT_GT(behind, 100u);
}

TEST(Tsdf, IntegratingTwiceDoublesWeights) {
  const auto k = intrinsics(32, 24, 30.0);
  auto once = TsdfVolume::from_bounds(Vec3(-1, -1, 1), Vec3(1, 1, 3), 0.05, 0.15);
  auto twice = TsdfVolume::from_bounds(Vec3(-1, -1, 1), Vec3(1, 1, 3), 0.05, 0.15);
  DepthMap d(32, 24);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) d.set(x, y, 2.0 + 0.01 * x - 0.02 * y);
  }
  once.integrate(d, k, CameraPose::identity());
  twice.integrate(d, k, CameraPose::identity());
  twice.integrate(d, k, CameraPose::identity());
  for (int kz = 0; kz < once.dims().z(); ++kz) {
    for (int j = 0; j < once.dims().y(); ++j) {
      for (int i = 0; i < once.dims().x(); ++i) {
        ASSERT_EQ(twice.weight(i, j, kz), 2.0 * once.weight(i, j, kz));
        ASSERT_EQ(twice.tsdf(i, j, kz), once.tsdf(i, j, kz));
      }
    }
  }
}

TEST(Tsdf, EmptyDepthLeavesVolumeUnchanged) {
  const auto k = intrinsics(32, 24, 30.0);
  auto vol = TsdfVolume::from_bounds(Vec3(-1, -1, 1), Vec3(1, 1, 3), 0.05, 0.15);
  vol.integrate(DepthMap(32, 24), k, CameraPose::identity());
  EXPECT_EQ(vol.allocated_bricks(), 0u);
  EXPECT_TRUE(vol.extract_mesh().empty());
}

TEST(Tsdf, SkyPixelsAreSkipped) {
  const auto k = intrinsics(32, 24, 30.0);
  auto vol = TsdfVolume::from_bounds(Vec3(-1, -1, 1), Vec3(1, 1, 3), 0.05, 0.15);
  vol.integrate(constant_depth(32, 24, 2.0), k, CameraPose::identity(), Mask(32, 24, 1));
  EXPECT_EQ(vol.allocated_bricks(), 0u);
}

TEST(Tsdf, TruncationBelowTwoVoxelsRejected) {
  EXPECT_THROW(TsdfVolume(Vec3::Zero(), 0.1, Vec3i(10, 10, 10), 0.15), ConfigError);
  EXPECT_NO_THROW(TsdfVolume(Vec3::Zero(), 0.1, Vec3i(10, 10, 10), 0.2));
}

TEST(Tsdf, IntegrationOrderDoesNotMatter) {
  const auto ref = fuse_sphere(8, 0.04);
  std::vector<int> order{5, 2, 7, 0, 3, 6, 1, 4};
  const auto perm = fuse_sphere(8, 0.04, order);
  EXPECT_TRUE(same_volume(ref.volume, perm.volume, 1e-12));
  std::reverse(order.begin(), order.end());
  EXPECT_TRUE(same_volume(ref.volume, fuse_sphere(8, 0.04, order).volume, 1e-12));
}

TEST(MarchingCubes, AllPositiveGivesEmptyMesh) {
  const auto k = intrinsics(32, 24, 30.0);
  auto vol = TsdfVolume::from_bounds(Vec3(-0.5, -0.5, 1), Vec3(0.5, 0.5, 1.5), 0.05, 0.15);
  vol.integrate(constant_depth(32, 24, 10.0), k, CameraPose::identity());
  EXPECT_GT(vol.allocated_bricks(), 0u);
  EXPECT_TRUE(vol.extract_mesh().empty());
}

TEST(MarchingCubes, PlaneFusionIsPlanar) {
  const auto k = intrinsics(96, 72, 80.0);
  const double voxel = 0.02;
  auto vol = TsdfVolume::from_bounds(Vec3(-0.4, -0.3, 1.6), Vec3(0.4, 0.3, 2.6), voxel, 5 * voxel);
  DepthMap d(96, 72);
  const Vec3 n = Vec3(0.2, -0.1, -1.0).normalized();
  const double off = n.dot(Vec3(0, 0, 2.0));
  for (int y = 0; y < 72; ++y) {
    for (int x = 0; x < 96; ++x) d.set(x, y, off / n.dot(k.ray(Vec2(x, y))));
  }
  vol.integrate(d, k, CameraPose::identity());
  const auto mesh = vol.extract_mesh();
  ASSERT_GT(mesh.faces.size(), 500u);
  double worst = 0.0;
  for (const auto& v : mesh.vertices) worst = std::max(worst, std::abs(n.dot(v) - off));
  EXPECT_LT(worst, voxel);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    EXPECT_GT(mesh.normals[i].dot(n), 0.9);
  }
}

TEST(MarchingCubes, SphereFromTwentyViews) {
  const auto f = fuse_sphere(20, 0.02);
  const auto mesh = f.volume.extract_mesh();
  ASSERT_GT(mesh.vertices.size(), 5000u);
  double sum = 0.0, worst = 0.0;
  for (const auto& v : mesh.vertices) {
    const double e = std::abs(v.norm() - 1.0);
    sum += e;
    worst = std::max(worst, e);
  }
  EXPECT_LT(sum / mesh.vertices.size(), 0.02);
  std::size_t outward = 0;
  for (const auto& face : mesh.faces) {
    const Vec3& a = mesh.vertices[face[0]];
    const Vec3 geo = (mesh.vertices[face[1]] - a).cross(mesh.vertices[face[2]] - a);
    outward += geo.dot(a + mesh.vertices[face[1]] + mesh.vertices[face[2]]) > 0.0;
  }
  EXPECT_GT(outward, 99 * mesh.faces.size() / 100);
}

TEST(MarchingCubes, EdgesAreSharedByAtMostTwoFaces) {
  const auto f = fuse_sphere(12, 0.04);
  const auto mesh = f.volume.extract_mesh();
  ASSERT_FALSE(mesh.empty());
  std::map<std::pair<int, int>, int> uses;
  for (const auto& face : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = face[e], b = face[(e + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::size_t interior = 0;
  for (const auto& [edge, n] : uses) {
    EXPECT_LE(n, 2);
    interior += n == 2;
  }
  EXPECT_GT(interior, 9 * uses.size() / 10);
}

TEST(MarchingCubes, VerticesLieNearZeroLevelSet) {
  const auto f = fuse_sphere(20, 0.04);
  const auto mesh = f.volume.extract_mesh();
  const auto& vol = f.volume;
  for (const auto& v : mesh.vertices) {
    const Vec3 g = (v - vol.origin()) / vol.voxel_size();
    const int i = static_cast<int>(std::floor(g.x())), j = static_cast<int>(std::floor(g.y())),
              k = static_cast<int>(std::floor(g.z()));
    bool neg = false, pos = false;
    for (int c = 0; c < 8; ++c) {
      const double t = vol.tsdf(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
      neg |= t < 0.0;
      pos |= t >= 0.0;
    }
    EXPECT_TRUE(neg && pos);
  }
}
