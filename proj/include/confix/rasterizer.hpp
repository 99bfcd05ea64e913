#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "confix/camera.hpp"
#include "confix/gaussian.hpp"
#include "confix/image.hpp"

namespace confix {

/// Rasterisation constants. Defaults follow common 3DGS practice.
struct RasterConfig {
  double near_plane = 0.01;
  double blur = 0.3;              ///< EWA low-pass dilation added to cov2d, px^2
  double alpha_max = 0.99;
  double min_transmittance = 1e-4;
  double cull_sigmas = 3.0;       ///< footprint radius in standard deviations
  double min_determinant = 1e-12;
};

/// Screen-space footprint of one Gaussian, generic over the scalar so the
/// backward pass can differentiate it with forward-mode autodiff.
template <typename Scalar>
struct Splat {
  Vec2<Scalar> mean2d;
  Mat2<Scalar> cov2d;
  Vec3<Scalar> conic;  ///< upper triangle (a, b, c) of cov2d^-1
  Scalar depth;        ///< camera-space z
  Scalar determinant;  ///< det(cov2d)
};

/// Perspective projection plus the EWA covariance J W Sigma W^T J^T + blur*I.
/// No visibility test is done here.
template <typename Scalar>
Splat<Scalar> project_splat(const Vec3<Scalar>& mean, const Vec3<Scalar>& log_scale,
                            const Vec4<Scalar>& rotation, const Camera& cam, double blur) {
  const Mat3<Scalar> k = cam.intrinsics.template cast<Scalar>();
  const Mat3<Scalar> w2c = cam.rotation.transpose().template cast<Scalar>();
  const Vec3<Scalar> p = w2c * (mean - cam.translation.template cast<Scalar>());
  const Vec3<Scalar> h = k * p;
  const Scalar inv_z = Scalar(1) / h[2];
  Splat<Scalar> s;
  s.depth = p[2];
  s.mean2d = Vec2<Scalar>(h[0] * inv_z, h[1] * inv_z);

  // Jacobian of dehom(K p) with respect to p.
  Eigen::Matrix<Scalar, 2, 3> jac;
  jac.row(0) = (k.row(0) - s.mean2d[0] * k.row(2)) * inv_z;
  jac.row(1) = (k.row(1) - s.mean2d[1] * k.row(2)) * inv_z;

  const Mat3<Scalar> sigma = covariance3d(log_scale, rotation);
  const Eigen::Matrix<Scalar, 2, 3> t = jac * w2c;
  s.cov2d = t * sigma * t.transpose();
  s.cov2d(0, 0) += Scalar(blur);
  s.cov2d(1, 1) += Scalar(blur);
  s.determinant = s.cov2d(0, 0) * s.cov2d(1, 1) - s.cov2d(0, 1) * s.cov2d(1, 0);
  const Scalar inv_det = Scalar(1) / s.determinant;
  s.conic = Vec3<Scalar>(s.cov2d(1, 1) * inv_det, -s.cov2d(0, 1) * inv_det, s.cov2d(0, 0) * inv_det);
  return s;
}

/// Gradients of a scalar loss with respect to the projection inputs.
struct SplatInputGrad {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
};

/// Reverse-mode product of project_splat<double>: given dL/d(mean2d) and
/// dL/d(conic), returns dL/d(mean, log_scale, rotation).
SplatInputGrad project_splat_vjp(const Eigen::Vector3d& mean, const Eigen::Vector3d& log_scale,
                                 const Eigen::Vector4d& rotation, const Camera& cam, double blur,
                                 const Eigen::Vector2d& d_mean2d, const Eigen::Vector3d& d_conic);

struct Projection {
  Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();
  double depth_z = 0.0;
  bool visible = false;
};

/// Projects g into cam. Invisible when behind the near plane or when the
/// cull_sigmas footprint misses the image.
Projection project_gaussian(const Gaussian<double>& g, const Camera& cam,
                            const RasterConfig& cfg = {});

/// Per-Gaussian screen-space data cached by the forward pass.
struct SplatRecord {
  Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
  Eigen::Vector3d conic = Eigen::Vector3d::Zero();
  double opacity = 0.0;
  double depth = 0.0;
  double radius = 0.0;  ///< footprint radius in px
  bool visible = false;
};

/// Everything the backward pass needs to replay the compositing of each pixel.
struct BlendState {
  std::uint64_t fingerprint = 0;
  std::size_t gaussian_count = 0;
  int width = 0;
  int height = 0;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  std::vector<std::uint32_t> offsets;   ///< CSR row pointers, one per pixel plus one
  std::vector<std::uint32_t> indices;   ///< per-pixel Gaussian lists, front to back
  std::vector<std::uint32_t> composited;  ///< entries of each list actually blended
  std::vector<double> falloff;  ///< exp(power) per blended entry, 0 where the ellipse test failed
  std::vector<double> final_transmittance;
  std::vector<SplatRecord> splats;
};

struct RenderDiagnostics {
  std::size_t visible = 0;
  std::size_t skipped_degenerate = 0;  ///< cov2d determinant below min_determinant
};

struct RenderOutput {
  ImageBuffer rgb;    ///< 3 channels
  ImageBuffer alpha;  ///< accumulated opacity 1 - T_final
  ImageBuffer depth;  ///< alpha-weighted camera z, 0 where alpha < 1e-6
  BlendState blend_state;
  RenderDiagnostics diagnostics;
};

/// Front-to-back alpha compositing of depth-sorted Gaussians (stable on
/// ties by scene index). Rows are processed in parallel; results do not
/// depend on the worker count.
RenderOutput render(const GaussianScene& scene, const Camera& cam,
                    const Eigen::Vector3d& background = Eigen::Vector3d::Zero(),
                    const RasterConfig& cfg = {});

/// dL/d(parameter) per Gaussian, same order as the scene.
struct GradientBundle {
  std::vector<Eigen::Vector3d> mean;
  std::vector<Eigen::Vector3d> log_scale;
  std::vector<Eigen::Vector4d> rotation;  ///< orthogonal to the unit quaternion
  std::vector<double> opacity_logit;
  std::vector<Eigen::Vector3d> color;
  std::vector<Eigen::Vector2d> pos2d;  ///< dL/d(mean2d) in px, before taking norms
  std::vector<std::uint8_t> touched;   ///< 1 when the Gaussian was visible in the view

  explicit GradientBundle(std::size_t n = 0) { resize(n); }
  void resize(std::size_t n);
  std::size_t size() const { return mean.size(); }
  void set_zero();
  /// this += other, element-wise.
  void accumulate(const GradientBundle& other);
  bool all_finite() const;
};

/// Analytic backward pass: chains pixel_grad = dL/d(rgb) through compositing,
/// the 2D Gaussian falloff, projection, and activations. Throws
/// ContractError if out was not produced by render(scene, cam, ...).
GradientBundle render_backward(const GaussianScene& scene, const Camera& cam, const RenderOutput& out,
                               const ImageBuffer& pixel_grad, const RasterConfig& cfg = {});

/// Order-sensitive hash of every parameter of scene and cam.
std::uint64_t fingerprint(const GaussianScene& scene, const Camera& cam);

}  // namespace confix
