#pragma once

#include <stdexcept>

#include "gbr/core/camera.hpp"

namespace gbr {

struct GaussianPrimitive {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 scale = Vec3::Ones();  // diagonal of S
  double opacity = 1.0;
  Vec3 color = Vec3::Zero();  // RGB in [0, 1]

  void validate() const {
    if (!position.allFinite()) throw std::invalid_argument("GaussianPrimitive: bad position");
    if (std::abs(rotation.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("GaussianPrimitive: rotation quaternion is not unit-norm");
    }
    if (!(scale.minCoeff() > 0.0) || !scale.allFinite()) {
      throw std::invalid_argument("GaussianPrimitive: scales must be positive");
    }
    if (!(opacity >= 0.0 && opacity <= 1.0)) {
      throw std::invalid_argument("GaussianPrimitive: opacity outside [0, 1]");
    }
    if (!(color.minCoeff() >= 0.0 && color.maxCoeff() <= 1.0)) {
      throw std::invalid_argument("GaussianPrimitive: color outside [0, 1]");
    }
  }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  /// Sigma = R S S^T R^T.
  Mat3 covariance() const {
    const Mat3 r = rotation_matrix();
    const Mat3 s2 = scale.cwiseProduct(scale).asDiagonal();
    return r * s2 * r.transpose();
  }

  /// World-space axis of the smallest scale factor.
  Vec3 normal() const {
    int axis = 0;
    scale.minCoeff(&axis);
    return rotation_matrix().col(axis);
  }
};

}  // namespace gbr
