#include "confix/objective.hpp"

#include <cmath>

#include "confix/error.hpp"
#include "confix/ssim.hpp"

namespace confix {

namespace {

void check_inputs(const ImageBuffer& render, const ImageBuffer& target, const ImageBuffer& weights,
                  const char* who) {
  require_same_shape(render, target, who);
  if (weights.channels() != 1 || weights.width() != render.width() || weights.height() != render.height()) {
    throw ContractError(std::string(who) + ": confidence map shape mismatch");
  }
}

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace

LossTerm weighted_l1(const ImageBuffer& render, const ImageBuffer& target, const ImageBuffer& weights) {
  check_inputs(render, target, weights, "weighted_l1");
  const int ch = render.channels();
  const std::size_t n = render.pixel_count();
  double wsum = 0.0, num = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double w = weights.data()[p];
    wsum += w;
    double l1 = 0.0;
    for (int c = 0; c < ch; ++c) l1 += std::abs(render.data()[p * ch + c] - target.data()[p * ch + c]);
    num += w * l1;
  }
  const double denom = wsum + kLossEpsilon;
  LossTerm out{num / denom, ImageBuffer(render.width(), render.height(), ch)};
  for (std::size_t p = 0; p < n; ++p) {
    const double w = weights.data()[p];
    if (w == 0.0) continue;
    for (int c = 0; c < ch; ++c) {
      out.grad.data()[p * ch + c] = w * sign(render.data()[p * ch + c] - target.data()[p * ch + c]) / denom;
    }
  }
  return out;
}

LossTerm weighted_ssim(const ImageBuffer& render, const ImageBuffer& target, const ImageBuffer& weights) {
  check_inputs(render, target, weights, "weighted_ssim");
  const int ch = render.channels();
  const std::size_t n = render.pixel_count();
  ImageBuffer blended(render.width(), render.height(), ch);
  for (std::size_t p = 0; p < n; ++p) {
    const double w = weights.data()[p];
    for (int c = 0; c < ch; ++c) {
      const std::size_t i = p * ch + c;
      blended.data()[i] = w * render.data()[i] + (1.0 - w) * target.data()[i];
    }
  }
  const SsimGradient s = ssim_with_gradient(blended, target);
  LossTerm out{1.0 - s.value, ImageBuffer(render.width(), render.height(), ch)};
  for (std::size_t p = 0; p < n; ++p) {
    const double w = weights.data()[p];
    if (w == 0.0) continue;
    for (int c = 0; c < ch; ++c) out.grad.data()[p * ch + c] = -w * s.d_a.data()[p * ch + c];
  }
  return out;
}

TargetLoss target_loss(const ImageBuffer& render, const ImageBuffer& target, const ImageBuffer& weights,
                       double lambda_s) {
  if (!(lambda_s >= 0.0 && lambda_s <= 1.0)) throw ValidationError("target_loss: lambda_s must be in [0,1]");
  TargetLoss out;
  const LossTerm l1 = weighted_l1(render, target, weights);
  out.l1 = l1.loss;
  out.grad = l1.grad;
  out.grad.flat() *= 1.0 - lambda_s;
  if (lambda_s > 0.0) {
    const LossTerm ss = weighted_ssim(render, target, weights);
    out.ssim = ss.loss;
    out.grad.flat() += lambda_s * ss.grad.flat();
  } else {
    out.ssim = weighted_ssim(render, target, weights).loss;
  }
  out.total = (1.0 - lambda_s) * out.l1 + lambda_s * out.ssim;
  return out;
}

TargetLoss gt_anchor_loss(const ImageBuffer& render, const ImageBuffer& gt_image, const Camera& view,
                          double lambda_s) {
  if (!view.is_support) {
    throw ContractError("gt_anchor_loss: view " + std::to_string(view.view_id) + " is not a support view");
  }
  const ImageBuffer ones(render.width(), render.height(), 1, 1.0);
  return target_loss(render, gt_image, ones, lambda_s);
}

LossReport batch_loss(const std::vector<BatchItem>& batch, const RepairConfig& cfg) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  LossReport report;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::size_t supports = 0;
  for (const auto& item : batch) supports += item.camera->is_support ? 1 : 0;
  const double anchor_scale = supports > 0 ? cfg.lambda_gt / static_cast<double>(supports) : 0.0;

  for (const auto& item : batch) {
    const TargetLoss t = target_loss(*item.render, *item.target, *item.weights, cfg.lambda_ssim);
    report.l1_term += inv_b * t.l1;
    report.ssim_term += inv_b * t.ssim;
    report.target_loss += inv_b * t.total;
    ImageBuffer grad = t.grad;
    grad.flat() *= inv_b;
    if (item.camera->is_support) {
      // The anchor equals the target term whenever the support's weights are all ones.
      const bool unit_weights = (item.weights->flat().array() == 1.0).all();
      const TargetLoss a = unit_weights ? t : gt_anchor_loss(*item.render, *item.target, *item.camera, cfg.lambda_ssim);
      report.gt_loss += a.total / static_cast<double>(supports);
      grad.flat() += anchor_scale * a.grad.flat();
    }
    report.per_pixel_grad.push_back(std::move(grad));
  }
  report.total = report.target_loss + cfg.lambda_gt * report.gt_loss;
  return report;
}

}  // namespace confix
