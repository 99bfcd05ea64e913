#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "confix/rasterizer.hpp"

namespace confix {

/// Hyperparameters for confidence estimation and repair. Defaults reproduce
/// the published configuration; the densification constants and the
/// rotation/scale/opacity learning rates follow the original 3DGS recipe.
struct RepairConfig {
  int iterations = 1000;
  int densify_interval = 100;
  int batch_size = 4;

  double lr_position = 1.6e-4;
  double lr_color = 5e-3;
  double lr_log_scale = 5e-3;
  double lr_rotation = 1e-3;
  double lr_opacity_logit = 5e-2;

  double lambda_ssim = 0.2;
  double lambda_gt = 1.0;

  double sigma_e = 0.10;
  double gamma = 0.3;
  double alpha_min = 0.3;
  int smooth_k = 15;

  double densify_grad_threshold = 2e-4;  ///< px
  double prune_opacity = 0.005;
  double split_scale_fraction = 0.01;   ///< of scene extent
  double densify_stop_fraction = 0.8;   ///< of iterations
  double split_scale_divisor = 1.6;
  int split_children = 2;
  double clone_offset_fraction = 0.01;  ///< of the largest activated scale

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-15;

  std::uint64_t rng_seed = 0;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();

  RasterConfig raster;
};

/// Throws ValidationError when a field is outside its documented range.
void validate(const RepairConfig& cfg);

}  // namespace confix
