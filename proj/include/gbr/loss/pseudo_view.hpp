#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gbr/core/rig.hpp"
#include "gbr/depth/projection.hpp"
#include "gbr/loss/losses.hpp"
#include "gbr/render/splat.hpp"

namespace gbr {

struct PseudoView {
  CameraPose pose;
  CameraIntrinsics intrinsics;
  DepthMap depth;
  NormalMap normals;
  RgbImage rgb;  // empty when no splat scene was given
  double weight = 0.5;
  int left = 0, right = 1;  // real views it interpolates
  double t = 0.5;
};

/// Rotation by spherical linear interpolation, camera center linearly.
inline CameraPose interpolate_pose(const CameraPose& a, const CameraPose& b, double t) {
  const Eigen::Quaterniond qa(a.rotation()), qb(b.rotation());
  const Mat3 r = orthonormalize(qa.slerp(t, qb).toRotationMatrix());
  return CameraPose::from_center(r, (1.0 - t) * a.center() + t * b.center());
}

inline CameraIntrinsics interpolate_intrinsics(const CameraIntrinsics& a, const CameraIntrinsics& b, double t) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("interpolate_intrinsics: views differ in resolution");
  }
  CameraIntrinsics k = a;
  k.fx = (1.0 - t) * a.fx + t * b.fx;
  k.fy = (1.0 - t) * a.fy + t * b.fy;
  k.cx = (1.0 - t) * a.cx + t * b.cx;
  k.cy = (1.0 - t) * a.cy + t * b.cy;
  return k;
}

/// Lifts every valid pixel of `src` and re-projects it into the target view,
/// keeping the nearest depth per pixel.
inline DepthMap forward_warp_depth(const DepthMap& src, const CameraIntrinsics& ks, const CameraPose& ps,
                                   const CameraIntrinsics& kt, const CameraPose& pt) {
  DepthMap out(kt.width, kt.height);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      if (!src.is_valid(x, y)) continue;
      const Vec3 pc = pt.transform(unproject(Vec2(x, y), src.depth(x, y), ks, ps));
      if (!(pc.z() > kMinCameraDepth)) continue;
      const long u = std::lround(kt.fx * pc.x() / pc.z() + kt.cx), v = std::lround(kt.fy * pc.y() / pc.z() + kt.cy);
      if (u < 0 || v < 0 || u >= kt.width || v >= kt.height) continue;
      const int ui = static_cast<int>(u), vi = static_cast<int>(v);
      if (!out.is_valid(ui, vi) || pc.z() < out.depth(ui, vi)) out.set(ui, vi, pc.z());
    }
  }
  return out;
}

/// Per pixel, neighbour sources deviating from the cloud projection d_w by
/// more than epsilon (relative) are excluded; the result is the mean of the
/// retained sources. Without d_w the neighbours are kept only when they agree
/// with each other within epsilon.
inline DepthMap fuse_pseudo_depth(const DepthMap& dn1, const DepthMap& dn2, const DepthMap& dw, double eps) {
  require_same_shape(dn1.depth, dn2.depth, "fuse_pseudo_depth");
  require_same_shape(dn1.depth, dw.depth, "fuse_pseudo_depth");
  DepthMap out(dw.width(), dw.height());
  for (std::size_t i = 0; i < dw.depth.size(); ++i) {
    double s = 0.0;
    int n = 0;
    if (dw.valid[i]) {
      const double ref = dw.depth[i];
      s = ref;
      n = 1;
      for (const DepthMap* d : {&dn1, &dn2}) {
        if (d->valid[i] && std::abs(d->depth[i] - ref) / ref <= eps) {
          s += d->depth[i];
          ++n;
        }
      }
    } else if (dn1.valid[i] && dn2.valid[i]) {
      const double m = 0.5 * (dn1.depth[i] + dn2.depth[i]);
      if (std::abs(dn1.depth[i] - dn2.depth[i]) / m <= eps) {
        s = dn1.depth[i] + dn2.depth[i];
        n = 2;
      }
    }
    if (n) {
      out.depth[i] = s / n;
      out.valid[i] = 1;
    }
  }
  return out;
}

struct PseudoViewSet {
  std::vector<PseudoView> views;
  std::vector<std::string> warnings;
};

/// `pseudo_view_count` views evenly spaced between each adjacent pair of
/// real views (i, i + 1). Depth fuses the two forward-warped refined depths
/// with the cloud projection; normals come from that depth and RGB is
/// rendered from `scene` when it has primitives.
inline PseudoViewSet synthesize_pseudo_views(const CameraRig& rig, const std::vector<DepthMap>& refined,
                                             const std::vector<Vec3>& cloud, const SplatScene& scene,
                                             const SupervisionConfig& cfg = {}, const RenderOptions& ropt = {}) {
  cfg.validate();
  rig.validate();
  if (rig.size() < 2) throw ConfigError("synthesize_pseudo_views: need at least 2 real views");
  if (refined.size() != rig.size()) throw std::invalid_argument("synthesize_pseudo_views: one refined depth per view");
  if (cloud.empty()) throw EmptyResultError("synthesize_pseudo_views: empty point cloud");
  PseudoViewSet out;
  const int n = cfg.pseudo_view_count;
  for (std::size_t i = 0; i + 1 < rig.size(); ++i) {
    const std::size_t j = i + 1;
    for (int s = 1; s <= n; ++s) {
      const double t = static_cast<double>(s) / (n + 1);
      PseudoView pv;
      pv.left = static_cast<int>(i);
      pv.right = static_cast<int>(j);
      pv.t = t;
      pv.weight = cfg.pseudo_weight;
      pv.pose = interpolate_pose(rig.poses[i], rig.poses[j], t);
      pv.intrinsics = interpolate_intrinsics(rig.intrinsics[i], rig.intrinsics[j], t);
      const auto d1 = forward_warp_depth(refined[i], rig.intrinsics[i], rig.poses[i], pv.intrinsics, pv.pose);
      const auto d2 = forward_warp_depth(refined[j], rig.intrinsics[j], rig.poses[j], pv.intrinsics, pv.pose);
      const auto tag = "pseudo view " + std::to_string(i) + "-" + std::to_string(j) + " t=" + std::to_string(t);
      if (d1.valid_count() == 0 && d2.valid_count() == 0) {
        out.warnings.push_back(tag + " dropped: neighbours do not overlap it");
        continue;
      }
      const auto dw = project_cloud_depth(cloud, pv.intrinsics, pv.pose).depth;
      pv.depth = fuse_pseudo_depth(d1, d2, dw, cfg.pseudo_epsilon);
      if (pv.depth.valid_count() == 0) {
        out.warnings.push_back(tag + " dropped: no pixel with agreeing depth sources");
        continue;
      }
      pv.normals = normals_from_depth(pv.depth, pv.intrinsics);
      if (!scene.primitives.empty()) pv.rgb = render(scene, pv.intrinsics, pv.pose, ropt).color;
      out.views.push_back(std::move(pv));
    }
  }
  return out;
}

}  // namespace gbr
