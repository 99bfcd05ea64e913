#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "confix/camera.hpp"
#include "confix/error.hpp"
#include "confix/image.hpp"

namespace confix {

/// Denominator regulariser of the consensus mean.
inline constexpr double kConsensusEpsilon = 1e-8;

/// Lifts pixel p at the given depth along its ray: X = R (d K^-1 [u v 1]^T) + t.
template <typename Scalar>
Vec3<Scalar> unproject_pixel(const Vec2<Scalar>& p, Scalar depth, const CameraView<Scalar>& cam) {
  if (!(depth > Scalar(0))) throw ValidationError("unproject_pixel: depth must be positive");
  const Vec3<Scalar> ray = cam.intrinsics.inverse() * Vec3<Scalar>(p[0], p[1], Scalar(1));
  return cam.rotation * (depth * ray) + cam.translation;
}

template <typename Scalar>
struct Reprojected {
  Vec2<Scalar> pixel = Vec2<Scalar>::Zero();
  Scalar camera_z = Scalar(0);
  bool degenerate = true;  ///< |camera_z| below 1e-9; pixel is meaningless
};

/// pixel = dehom(K R^T (X - t)); camera_z is the third homogeneous coordinate.
template <typename Scalar>
Reprojected<Scalar> reproject_point(const Vec3<Scalar>& world, const CameraView<Scalar>& cam) {
  const Vec3<Scalar> h = cam.intrinsics * (cam.rotation.transpose() * (world - cam.translation));
  Reprojected<Scalar> r;
  r.camera_z = h[2];
  r.degenerate = std::abs(h[2]) < Scalar(1e-9);
  if (!r.degenerate) r.pixel = Vec2<Scalar>(h[0] / h[2], h[1] / h[2]);
  return r;
}

/// Bilinear lookup at a continuous pixel coordinate. Returns false when any
/// of the four taps would fall outside the image; nothing is clamped.
inline bool sample_bilinear(const ImageBuffer& img, const Eigen::Vector2d& p, Eigen::Vector3d& out) {
  const double u = p[0], v = p[1];
  if (!(u >= 0.0 && v >= 0.0 && u <= img.width() - 1 && v <= img.height() - 1)) return false;
  int x0 = static_cast<int>(std::floor(u));
  int y0 = static_cast<int>(std::floor(v));
  // On the last row/column the upper tap has zero weight; step back one.
  if (x0 == img.width() - 1) x0 = std::max(0, x0 - 1);
  if (y0 == img.height() - 1) y0 = std::max(0, y0 - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = u - x0, fy = v - y0;
  const int ch = img.channels();
  for (int c = 0; c < 3; ++c) {
    const int cc = ch == 1 ? 0 : c;
    const double top = (1.0 - fx) * img(x0, y0, cc) + fx * img(x1, y0, cc);
    const double bot = (1.0 - fx) * img(x0, y1, cc) + fx * img(x1, y1, cc);
    out[c] = (1.0 - fy) * top + fy * bot;
  }
  return true;
}

struct ReprojectionSample {
  int support_view_id = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  bool in_bounds = false;
  bool positive_depth = false;
  Eigen::Vector3d sampled_color = Eigen::Vector3d::Zero();  ///< only meaningful when valid()

  bool valid() const { return in_bounds && positive_depth; }
};

/// A support camera together with its ground-truth image.
struct SupportView {
  const Camera* camera;
  const ImageBuffer* image;
};

/// Reprojects a world point into one support view and samples it.
inline ReprojectionSample sample_support(const Eigen::Vector3d& world, const SupportView& s) {
  ReprojectionSample out;
  out.support_view_id = s.camera->view_id;
  const auto r = reproject_point(world, *s.camera);
  if (r.degenerate) return out;
  out.pixel = r.pixel;
  out.positive_depth = r.camera_z > 0.0;
  Eigen::Vector3d c;
  out.in_bounds = sample_bilinear(*s.image, r.pixel, c);
  if (out.in_bounds) out.sampled_color = c;
  return out;
}

struct Consensus {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  int valid_count = 0;
};

/// Mean of the valid support samples for pseudo-view pixel p, written as
/// sum / (count + eps). With no valid sample the color is zero and the count
/// is the signal.
inline Consensus consensus_color(const Eigen::Vector2d& p, const Camera& pseudo_view, double depth_proxy,
                                 const std::vector<SupportView>& supports) {
  const Eigen::Vector3d world = unproject_pixel(p, depth_proxy, pseudo_view);
  Consensus out;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& s : supports) {
    const ReprojectionSample smp = sample_support(world, s);
    if (!smp.valid()) continue;
    sum += smp.sampled_color;
    ++out.valid_count;
  }
  out.color = sum / (out.valid_count + kConsensusEpsilon);
  return out;
}

/// Mean absolute per-channel difference, in [0, 1] for inputs in [0, 1].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar discrepancy(const Eigen::MatrixBase<DerivedA>& pseudo_color,
                                      const Eigen::MatrixBase<DerivedB>& consensus) {
  return (pseudo_color - consensus).cwiseAbs().sum() / typename DerivedA::Scalar(3);
}

}  // namespace confix
