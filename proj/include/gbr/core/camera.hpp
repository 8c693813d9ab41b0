#pragma once

// Pinhole cameras and rigid / similarity transforms.
//
// Pose convention (used everywhere in gbr): a CameraPose maps world points
// into the camera frame, x_cam = R * x_world + t. The camera looks down +z,
// x points right and y points down in the image.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace gbr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kOrthonormalTolerance = 1e-9;
inline constexpr double kMinCameraDepth = 1e-9;

inline bool is_rotation(const Mat3& r, double tol = kOrthonormalTolerance) {
  if (!r.allFinite()) return false;
  const Mat3 err = r.transpose() * r - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() < tol && r.determinant() > 0.0;
}

inline void require_rotation(const Mat3& r, const char* who) {
  if (!is_rotation(r)) {
    throw std::invalid_argument(std::string(who) + ": rotation is not orthonormal with det +1");
  }
}

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Rodrigues: rotation vector -> matrix.
inline Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

inline Vec3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

/// Snap a nearly-orthonormal matrix back onto SO(3).
inline Mat3 orthonormalize(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  return q.toRotationMatrix();
}

inline double rotation_angle(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int width_, int height_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(width_), height(height_) {
    validate();
  }

  void validate() const {
    if (!(std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0)) {
      throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive and finite");
    }
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("CameraIntrinsics: image size must be positive");
    }
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
      throw std::invalid_argument("CameraIntrinsics: principal point outside the image");
    }
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  /// K^-1 [u v 1]^T: the camera-frame ray with unit z component.
  Vec3 ray(const Vec2& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0};
  }

  bool contains(const Vec2& pixel) const {
    return pixel.x() > -0.5 && pixel.y() > -0.5 && pixel.x() < width - 0.5 &&
           pixel.y() < height - 0.5;
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// World -> camera rigid transform.
class CameraPose {
 public:
  CameraPose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  CameraPose(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    require_rotation(rotation_, "CameraPose");
    if (!translation_.allFinite()) {
      throw std::invalid_argument("CameraPose: non-finite translation");
    }
  }

  static CameraPose identity() { return {}; }

  /// Pose of a camera centered at `center` with world->camera rotation
  /// `world_to_camera`.
  static CameraPose from_center(const Mat3& world_to_camera, const Vec3& center) {
    return {world_to_camera, -world_to_camera * center};
  }

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 center() const { return -rotation_.transpose() * translation_; }
  Vec3 transform(const Vec3& x) const { return rotation_ * x + translation_; }
  Vec3 inverse_transform(const Vec3& x) const {
    return rotation_.transpose() * (x - translation_);
  }

  CameraPose inverse() const {
    return {rotation_.transpose(), -rotation_.transpose() * translation_};
  }

  /// (a * b)(x) = a(b(x)).
  friend CameraPose operator*(const CameraPose& a, const CameraPose& b) {
    return {a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_};
  }

  bool operator==(const CameraPose&) const = default;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// x -> scale * R * x + t.
class SimilarityTransform {
 public:
  SimilarityTransform() : scale_(1.0), rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  SimilarityTransform(double scale, const Mat3& rotation, const Vec3& translation)
      : scale_(scale), rotation_(rotation), translation_(translation) {
    if (!(std::isfinite(scale_) && scale_ > 0.0)) {
      throw std::invalid_argument("SimilarityTransform: scale must be positive");
    }
    require_rotation(rotation_, "SimilarityTransform");
    if (!translation_.allFinite()) {
      throw std::invalid_argument("SimilarityTransform: non-finite translation");
    }
  }

  static SimilarityTransform identity() { return {}; }
  static SimilarityTransform from_pose(const CameraPose& p) {
    return {1.0, p.rotation(), p.translation()};
  }

  double scale() const noexcept { return scale_; }
  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 apply(const Vec3& x) const { return scale_ * (rotation_ * x) + translation_; }
  Vec3 operator()(const Vec3& x) const { return apply(x); }

  SimilarityTransform inverse() const {
    const Mat3 rt = rotation_.transpose();
    return {1.0 / scale_, rt, -(rt * translation_) / scale_};
  }

  friend SimilarityTransform operator*(const SimilarityTransform& a,
                                       const SimilarityTransform& b) {
    return {a.scale_ * b.scale_, a.rotation_ * b.rotation_,
            a.scale_ * (a.rotation_ * b.translation_) + a.translation_};
  }

  /// Rigid part only; valid when scale() == 1.
  CameraPose rigid() const { return {rotation_, translation_}; }

 private:
  double scale_;
  Mat3 rotation_;
  Vec3 translation_;
};

/// Pixel of a world point, or nullopt when the point is not in front of the
/// camera (callers treat that as "not visible").
inline std::optional<Vec2> project(const Vec3& point, const CameraIntrinsics& k,
                                   const CameraPose& pose) {
  const Vec3 pc = pose.transform(point);
  if (!(pc.z() > kMinCameraDepth)) return std::nullopt;
  return Vec2(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
}

/// Camera-frame point for a pixel at z-depth `depth`.
inline Vec3 unproject_camera(const Vec2& pixel, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("unproject: depth must be positive");
  }
  return k.ray(pixel) * depth;
}

inline Vec3 unproject(const Vec2& pixel, double depth, const CameraIntrinsics& k,
                      const CameraPose& pose) {
  return pose.inverse_transform(unproject_camera(pixel, depth, k));
}

/// Camera pose at `eye` looking at `target`, world up `up`.
inline CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitX());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  return CameraPose::from_center(orthonormalize(r), eye);
}

}  // namespace gbr
