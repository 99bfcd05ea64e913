#pragma once

#include "confix/image.hpp"

namespace confix {

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, averaged over pixels and channels. Windows that
/// straddle the border are truncated and renormalised, so any image size
/// works. This is the single implementation used by both the training loss
/// and evaluation.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct SsimGradient {
  double value = 0.0;
  ImageBuffer d_a;  ///< d ssim / d a, same shape as a
};

/// SSIM together with its exact gradient with respect to the first image.
SsimGradient ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace confix
