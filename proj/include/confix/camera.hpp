#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include "confix/gaussian.hpp"

namespace confix {

/// Pinhole camera with a camera-to-world pose: X_world = R * X_cam + t.
template <typename Scalar>
struct CameraView {
  Mat3<Scalar> intrinsics = Mat3<Scalar>::Identity();
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();
  int width = 0;
  int height = 0;
  int view_id = 0;
  bool is_support = false;

  Scalar fx() const { return intrinsics(0, 0); }
  Scalar fy() const { return intrinsics(1, 1); }
  Scalar cx() const { return intrinsics(0, 2); }
  Scalar cy() const { return intrinsics(1, 2); }

  /// Camera center in world coordinates.
  const Vec3<Scalar>& center() const { return translation; }

  /// World point expressed in the camera frame.
  template <typename Derived>
  Vec3<typename Derived::Scalar> to_camera(const Eigen::MatrixBase<Derived>& world) const {
    using S = typename Derived::Scalar;
    return rotation.template cast<S>().transpose() * (world - translation.template cast<S>());
  }

  friend bool operator==(const CameraView& a, const CameraView& b) {
    return a.intrinsics == b.intrinsics && a.rotation == b.rotation &&
           a.translation == b.translation && a.width == b.width && a.height == b.height &&
           a.view_id == b.view_id && a.is_support == b.is_support;
  }
};

using Camera = CameraView<double>;

/// Throws ValidationError if R is not a proper rotation (to 1e-6), focal
/// lengths are not positive, or the principal point lies outside the image.
void validate_camera(const Camera& cam);

/// Fronto-parallel pinhole intrinsics.
inline Mat3<double> make_intrinsics(double fx, double fy, double cx, double cy) {
  Mat3<double> k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

}  // namespace confix
