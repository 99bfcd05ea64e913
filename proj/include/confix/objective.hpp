#pragma once

#include <vector>

#include "confix/camera.hpp"
#include "confix/confidence.hpp"
#include "confix/image.hpp"
#include "confix/repair_config.hpp"

namespace confix {

/// Regulariser of the confidence-sum denominator.
inline constexpr double kLossEpsilon = 1e-8;

/// A loss value with its gradient with respect to the rendered image.
struct LossTerm {
  double loss = 0.0;
  ImageBuffer grad;  ///< dL / d(render), 3 channels
};

/// sum_p w(p) |C(p) - I(p)|_1 / (sum_p w(p) + eps).
LossTerm weighted_l1(const ImageBuffer& render, const ImageBuffer& target, const ImageBuffer& weights);

/// 1 - SSIM(w C + (1 - w) I, I). Only the w C term carries gradient.
LossTerm weighted_ssim(const ImageBuffer& render, const ImageBuffer& target, const ImageBuffer& weights);

struct TargetLoss {
  double l1 = 0.0;
  double ssim = 0.0;  ///< the (1 - SSIM) term
  double total = 0.0;
  ImageBuffer grad;
};

/// (1 - lambda_s) * weighted_l1 + lambda_s * weighted_ssim.
TargetLoss target_loss(const ImageBuffer& render, const ImageBuffer& target, const ImageBuffer& weights,
                       double lambda_s);

/// Anchoring term of a support view: target_loss against its ground truth
/// with unit weights. Throws ContractError for non-support views.
TargetLoss gt_anchor_loss(const ImageBuffer& render, const ImageBuffer& gt_image, const Camera& view,
                          double lambda_s);

/// One rendered view of a training batch.
struct BatchItem {
  const Camera* camera;
  const ImageBuffer* render;
  const ImageBuffer* target;
  const ImageBuffer* weights;
};

struct LossReport {
  double l1_term = 0.0;      ///< batch mean of the weighted L1 terms
  double ssim_term = 0.0;    ///< batch mean of the (1 - SSIM) terms
  double target_loss = 0.0;  ///< batch mean of target losses
  double gt_loss = 0.0;      ///< mean anchor loss over support views (0 if none)
  double total = 0.0;        ///< target_loss + lambda_gt * gt_loss
  std::vector<ImageBuffer> per_pixel_grad;  ///< dL/d(render) for each batch item
};

/// Batch objective: mean target loss plus lambda_gt times the mean anchor
/// loss over the support views present. Reductions run in batch order.
LossReport batch_loss(const std::vector<BatchItem>& batch, const RepairConfig& cfg);

}  // namespace confix
