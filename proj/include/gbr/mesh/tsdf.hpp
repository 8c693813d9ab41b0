#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "gbr/core/error.hpp"
#include "gbr/core/geometry_types.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/mesh/mc_tables.hpp"

namespace gbr {

using Vec3i = Eigen::Vector3i;

/// Dense voxel grid stored as lazily allocated 8^3 bricks. Voxel (i, j, k)
/// has its center at origin + voxel_size * (i, j, k). Unallocated bricks read
/// as unobserved (tsdf 1, weight 0).
class TsdfVolume {
 public:
  static constexpr int kBrick = 8;
  static constexpr int kBrickVoxels = kBrick * kBrick * kBrick;

  TsdfVolume() = default;
  TsdfVolume(const Vec3& origin, double voxel_size, const Vec3i& dims, double truncation)
      : origin_(origin), voxel_(voxel_size), dims_(dims), trunc_(truncation) {
    if (!(voxel_size > 0.0) || !origin.allFinite()) throw ConfigError("TsdfVolume: voxel size must be > 0");
    if (dims.minCoeff() < 2) throw ConfigError("TsdfVolume: need at least 2 voxels per axis");
    if (!(truncation >= 2.0 * voxel_size)) throw ConfigError("TsdfVolume: truncation must be >= 2 voxel sizes");
    bdims_ = (dims.array() + kBrick - 1) / kBrick;
    bricks_.resize(static_cast<std::size_t>(bdims_.prod()));
  }

  /// Volume covering [lo, hi] padded by the truncation distance.
  static TsdfVolume from_bounds(const Vec3& lo, const Vec3& hi, double voxel_size, double truncation) {
    if (!(voxel_size > 0.0)) throw ConfigError("TsdfVolume: voxel size must be > 0");
    const Vec3 o = lo - Vec3::Constant(truncation);
    const Vec3 extent = (hi - lo).array() + 2.0 * truncation;
    Vec3i dims;
    for (int a = 0; a < 3; ++a) dims[a] = static_cast<int>(std::ceil(extent[a] / voxel_size)) + 1;
    return {o, voxel_size, dims, truncation};
  }

  const Vec3& origin() const noexcept { return origin_; }
  double voxel_size() const noexcept { return voxel_; }
  const Vec3i& dims() const noexcept { return dims_; }
  double truncation() const noexcept { return trunc_; }

  Vec3 center(int i, int j, int k) const { return origin_ + voxel_ * Vec3(i, j, k); }

  double tsdf(int i, int j, int k) const {
    const Brick* b = brick(i, j, k);
    return b ? b->tsdf[local(i, j, k)] : 1.0;
  }
  double weight(int i, int j, int k) const {
    const Brick* b = brick(i, j, k);
    return b ? b->weight[local(i, j, k)] : 0.0;
  }

  std::size_t allocated_bricks() const {
    return static_cast<std::size_t>(std::count_if(bricks_.begin(), bricks_.end(), [](const auto& b) { return b != nullptr; }));
  }

  /// Fuses one depth map: each voxel center is projected to its nearest
  /// pixel, sd = depth - camera z is clamped to +-truncation and averaged in
  /// with weight 1. Voxels more than the truncation behind the surface,
  /// outside the image, or on invalid or sky pixels are left untouched.
  void integrate(const DepthMap& depth, const CameraIntrinsics& k, const CameraPose& pose, const Mask& sky = {}) {
    require_same_shape(depth.depth, depth.valid, "TsdfVolume::integrate");
    if (depth.width() != k.width || depth.height() != k.height) {
      throw std::invalid_argument("TsdfVolume::integrate: depth map and intrinsics differ in size");
    }
    if (!sky.empty()) require_same_shape(depth.depth, sky, "TsdfVolume::integrate");
    const Mat3& r = pose.rotation();
    const Vec3& t = pose.translation();
    const std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(bricks_.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8)
#endif
    for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
      const int bx = static_cast<int>(bi % bdims_.x());
      const int by = static_cast<int>((bi / bdims_.x()) % bdims_.y());
      const int bz = static_cast<int>(bi / (static_cast<std::ptrdiff_t>(bdims_.x()) * bdims_.y()));
      auto& slot = bricks_[static_cast<std::size_t>(bi)];
      for (int lz = 0; lz < kBrick; ++lz) {
        const int kz = bz * kBrick + lz;
        if (kz >= dims_.z()) break;
        for (int ly = 0; ly < kBrick; ++ly) {
          const int jy = by * kBrick + ly;
          if (jy >= dims_.y()) break;
          for (int lx = 0; lx < kBrick; ++lx) {
            const int ix = bx * kBrick + lx;
            if (ix >= dims_.x()) break;
            const Vec3 pc = r * center(ix, jy, kz) + t;
            if (!(pc.z() > kMinCameraDepth)) continue;
            const long u = std::lround(k.fx * pc.x() / pc.z() + k.cx);
            const long v = std::lround(k.fy * pc.y() / pc.z() + k.cy);
            if (u < 0 || v < 0 || u >= k.width || v >= k.height) continue;
            const std::size_t px = depth.depth.index(static_cast<int>(u), static_cast<int>(v));
            if (!depth.valid[px] || (!sky.empty() && sky[px])) continue;
            const double sd = depth.depth[px] - pc.z();
            if (sd < -trunc_) continue;
            const double f = std::min(sd, trunc_) / trunc_;
            if (!slot) slot = std::make_unique<Brick>();
            const int li = (lz * kBrick + ly) * kBrick + lx;
            double& w = slot->weight[li];
            double& d = slot->tsdf[li];
            d = (d * w + f) / (w + 1.0);
            w += 1.0;
          }
        }
      }
    }
  }

  /// Marching cubes on the zero level set. Cells with an unobserved corner
  /// are skipped; vertices on shared edges are shared, triangles face the
  /// positive (free-space) side and vertex normals follow the tsdf gradient.
  TriangleMesh extract_mesh() const {
    TriangleMesh out;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                          {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    static constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                         {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    const std::uint64_t nx = static_cast<std::uint64_t>(dims_.x()), ny = static_cast<std::uint64_t>(dims_.y());
    auto voxel_id = [&](int i, int j, int k) {
      return (static_cast<std::uint64_t>(k) * ny + static_cast<std::uint64_t>(j)) * nx + static_cast<std::uint64_t>(i);
    };
    for (int k = 0; k + 1 < dims_.z(); ++k) {
      for (int j = 0; j + 1 < dims_.y(); ++j) {
        for (int i = 0; i + 1 < dims_.x(); ++i) {
          if (!brick(i, j, k)) continue;
          double val[8];
          int cube = 0;
          bool observed = true;
          for (int c = 0; c < 8; ++c) {
            const int ci = i + kCorner[c][0], cj = j + kCorner[c][1], ck = k + kCorner[c][2];
            if (weight(ci, cj, ck) <= 0.0) {
              observed = false;
              break;
            }
            val[c] = tsdf(ci, cj, ck);
            if (val[c] < 0.0) cube |= 1 << c;
          }
          if (!observed) continue;
          const std::uint16_t edges = mesh::detail::kEdgeTable[static_cast<std::size_t>(cube)];
          if (edges == 0) continue;
          std::array<int, 12> vid{};
          for (int e = 0; e < 12; ++e) {
            if (!(edges & (1 << e))) continue;
            const int a = kEdge[e][0], b = kEdge[e][1];
            const int ai = i + kCorner[a][0], aj = j + kCorner[a][1], ak = k + kCorner[a][2];
            const int bi = i + kCorner[b][0], bj = j + kCorner[b][1], bk = k + kCorner[b][2];
            const std::uint64_t va = voxel_id(ai, aj, ak), vb = voxel_id(bi, bj, bk);
            const std::uint64_t key = std::min(va, vb) * 3 + (ai != bi ? 0 : aj != bj ? 1 : 2);
            auto [it, fresh] = edge_vertex.try_emplace(key, static_cast<int>(out.vertices.size()));
            if (fresh) {
              const double s = val[a] / (val[a] - val[b]);
              const Vec3 pa = center(ai, aj, ak), pb = center(bi, bj, bk);
              out.vertices.push_back(pa + s * (pb - pa));
              const Vec3 n = (1.0 - s) * gradient(ai, aj, ak) + s * gradient(bi, bj, bk);
              out.normals.push_back(n.norm() > 0.0 ? Vec3(n.normalized()) : Vec3::Zero());
            }
            vid[static_cast<std::size_t>(e)] = it->second;
          }
          const auto& tri = mesh::detail::kTriTable[static_cast<std::size_t>(cube)];
          for (int t = 0; tri[static_cast<std::size_t>(t)] != -1; t += 3) {
            std::array<int, 3> f{vid[static_cast<std::size_t>(tri[static_cast<std::size_t>(t)])],
                                 vid[static_cast<std::size_t>(tri[static_cast<std::size_t>(t + 1)])],
                                 vid[static_cast<std::size_t>(tri[static_cast<std::size_t>(t + 2)])]};
            if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
            const Vec3& p0 = out.vertices[static_cast<std::size_t>(f[0])];
            const Vec3 geo = (out.vertices[static_cast<std::size_t>(f[1])] - p0)
                                 .cross(out.vertices[static_cast<std::size_t>(f[2])] - p0);
            const Vec3 grad = out.normals[static_cast<std::size_t>(f[0])] + out.normals[static_cast<std::size_t>(f[1])] +
                              out.normals[static_cast<std::size_t>(f[2])];
            if (geo.dot(grad) < 0.0) std::swap(f[1], f[2]);
            out.faces.push_back(f);
          }
        }
      }
    }
    return out;
  }

  nlohmann::json meta_json() const {
    return {{"origin", {origin_.x(), origin_.y(), origin_.z()}},
            {"voxel_size", voxel_},
            {"dims", {dims_.x(), dims_.y(), dims_.z()}},
            {"truncation", trunc_},
            {"brick_size", kBrick},
            {"allocated_bricks", allocated_bricks()}};
  }

 private:
  struct Brick {
    Brick() {
      std::fill(std::begin(tsdf), std::end(tsdf), 1.0);
      std::fill(std::begin(weight), std::end(weight), 0.0);
    }
    double tsdf[kBrickVoxels];
    double weight[kBrickVoxels];
  };

  const Brick* brick(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || i >= dims_.x() || j >= dims_.y() || k >= dims_.z()) return nullptr;
    const std::size_t b = (static_cast<std::size_t>(k / kBrick) * static_cast<std::size_t>(bdims_.y()) +
                           static_cast<std::size_t>(j / kBrick)) *
                              static_cast<std::size_t>(bdims_.x()) +
                          static_cast<std::size_t>(i / kBrick);
    return bricks_[b].get();
  }

  static int local(int i, int j, int k) { return ((k % kBrick) * kBrick + (j % kBrick)) * kBrick + (i % kBrick); }

  /// Central differences over observed neighbours, one-sided at the border.
  Vec3 gradient(int i, int j, int k) const {
    Vec3 g;
    const int idx[3] = {i, j, k};
    for (int a = 0; a < 3; ++a) {
      int lo[3] = {i, j, k}, hi[3] = {i, j, k};
      lo[a] = std::max(idx[a] - 1, 0);
      hi[a] = std::min(idx[a] + 1, dims_[a] - 1);
      if (weight(lo[0], lo[1], lo[2]) <= 0.0) lo[a] = idx[a];
      if (weight(hi[0], hi[1], hi[2]) <= 0.0) hi[a] = idx[a];
      const int span = hi[a] - lo[a];
      g[a] = span ? (tsdf(hi[0], hi[1], hi[2]) - tsdf(lo[0], lo[1], lo[2])) / (span * voxel_) : 0.0;
    }
    return g;
  }

  Vec3 origin_ = Vec3::Zero();
  double voxel_ = 1.0;
  Vec3i dims_ = Vec3i::Zero();
  double trunc_ = 2.0;
  Vec3i bdims_ = Vec3i::Zero();
  std::vector<std::unique_ptr<Brick>> bricks_;
};

/// Scene bounding-box diagonal / 256.
inline double default_voxel_size(const Vec3& lo, const Vec3& hi) { return (hi - lo).norm() / 256.0; }

}  // namespace gbr
