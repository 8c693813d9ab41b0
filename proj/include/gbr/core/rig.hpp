#pragma once

#include <stdexcept>
#include <vector>

#include "gbr/core/camera.hpp"

namespace gbr {

/// Per-view intrinsics and world->camera poses; index = view id.
struct CameraRig {
  std::vector<CameraIntrinsics> intrinsics;
  std::vector<CameraPose> poses;

  std::size_t size() const noexcept { return poses.size(); }

  void validate() const {
    if (intrinsics.size() != poses.size()) {
      throw std::invalid_argument("CameraRig: intrinsics and poses differ in count");
    }
    for (const auto& k : intrinsics) k.validate();
  }

  std::vector<Vec3> centers() const {
    std::vector<Vec3> c;
    c.reserve(poses.size());
    for (const auto& p : poses) c.push_back(p.center());
    return c;
  }

  /// Re-expresses the rig (and optional points) so view 0 sits at the
  /// identity pose.
  CameraRig anchored(std::vector<Vec3>* points = nullptr) const {
    if (poses.empty()) return *this;
    const CameraPose g = poses.front();
    const CameraPose g_inv = g.inverse();
    CameraRig out = *this;
    for (auto& p : out.poses) p = p * g_inv;
    if (points) {
      for (auto& x : *points) x = g.transform(x);
    }
    return out;
  }
};

}  // namespace gbr
