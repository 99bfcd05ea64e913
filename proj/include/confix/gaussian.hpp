#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace confix {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// One anisotropic Gaussian in its optimisation parameterisation.
///
/// Scale is stored as its log and opacity as its logit so that the activated
/// values stay in range under unconstrained updates. Rotation is a quaternion
/// stored (w, x, y, z); it is renormalised after each optimiser step rather
/// than reparameterised. Color is view-independent RGB.
template <typename Scalar>
struct Gaussian {
  Vec3<Scalar> mean = Vec3<Scalar>::Zero();
  Vec3<Scalar> log_scale = Vec3<Scalar>::Zero();
  Vec4<Scalar> rotation = Vec4<Scalar>(Scalar(1), Scalar(0), Scalar(0), Scalar(0));
  Scalar opacity_logit = Scalar(0);
  Vec3<Scalar> color = Vec3<Scalar>::Zero();

  friend bool operator==(const Gaussian& a, const Gaussian& b) {
    return a.mean == b.mean && a.log_scale == b.log_scale && a.rotation == b.rotation &&
           a.opacity_logit == b.opacity_logit && a.color == b.color;
  }
};

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  return Scalar(1) / (Scalar(1) + exp(-x));
}

template <typename Scalar>
Scalar logit(Scalar p) {
  using std::log;
  return log(p / (Scalar(1) - p));
}

template <typename Scalar>
struct Activated {
  Vec3<Scalar> scale;
  Scalar opacity;
};

/// exp(log_scale) and sigmoid(opacity_logit).
template <typename Scalar>
Activated<Scalar> activate(const Gaussian<Scalar>& g) {
  return {g.log_scale.array().exp().matrix(), sigmoid(g.opacity_logit)};
}

/// Rotation matrix of a (w, x, y, z) quaternion; the input need not be unit.
template <typename Derived>
Mat3<typename Derived::Scalar> quaternion_to_matrix(const Eigen::MatrixBase<Derived>& q_in) {
  using Scalar = typename Derived::Scalar;
  const Vec4<Scalar> q = q_in / q_in.norm();
  const Scalar w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3<Scalar> r;
  r << Scalar(1) - Scalar(2) * (y * y + z * z), Scalar(2) * (x * y - w * z),
      Scalar(2) * (x * z + w * y), Scalar(2) * (x * y + w * z),
      Scalar(1) - Scalar(2) * (x * x + z * z), Scalar(2) * (y * z - w * x),
      Scalar(2) * (x * z - w * y), Scalar(2) * (y * z + w * x),
      Scalar(1) - Scalar(2) * (x * x + y * y);
  return r;
}

/// World-space covariance R S S^T R^T.
template <typename Scalar>
Mat3<Scalar> covariance3d(const Vec3<Scalar>& log_scale, const Vec4<Scalar>& rotation) {
  const Mat3<Scalar> rs = quaternion_to_matrix(rotation) * log_scale.array().exp().matrix().asDiagonal();
  return rs * rs.transpose();
}

/// Ordered set of Gaussians. Order is meaningful: it is the tie-break for
/// depth sorting and is preserved by serialisation.
struct GaussianScene {
  std::vector<Gaussian<double>> gaussians;

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }

  friend bool operator==(const GaussianScene& a, const GaussianScene& b) {
    return a.gaussians == b.gaussians;
  }
};

/// Throws ValidationError naming the first record with a non-finite field.
void validate_scene(const GaussianScene& scene);

}  // namespace confix
