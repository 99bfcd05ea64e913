#pragma once

#include <vector>

#include "confix/camera.hpp"
#include "confix/image.hpp"
#include "confix/rasterizer.hpp"
#include "confix/repair_config.hpp"
#include "confix/reprojection.hpp"

namespace confix {

/// Per-view confidence field. `weights` is the smoothed map used for
/// training; `raw` keeps the pre-smoothing scores for inspection.
struct ConfidenceMap {
  ImageBuffer weights;
  ImageBuffer raw;
  int view_id = 0;

  double mean() const;
};

/// Three-branch score: exp(-e^2 / (2 sigma_e^2)) when at least one support
/// validated the pixel and coverage reaches alpha_min, gamma when coverage is
/// fine but no support saw it, and 0 when coverage is below alpha_min.
double raw_confidence(double e, int valid_count, double alpha, const RepairConfig& cfg);

/// k x k box mean, normalised at borders by the number of in-image taps.
/// Throws ValidationError for even or non-positive k.
ImageBuffer smooth_confidence(const ImageBuffer& raw, int k);

/// Confidence map of a pseudo-target: lift each pixel through the scaffold
/// depth, check it against the supports, score, then smooth. Pixels with no
/// scaffold coverage (depth <= 0) take the zero branch without reprojection.
ConfidenceMap build_confidence_map(const ImageBuffer& pseudo, const Camera& pseudo_cam,
                                   const RenderOutput& scaffold_render,
                                   const std::vector<SupportView>& supports, const RepairConfig& cfg);

/// Same as above, reading coverage and depth from bare images.
ConfidenceMap build_confidence_map(const ImageBuffer& pseudo, const Camera& pseudo_cam,
                                   const ImageBuffer& scaffold_alpha, const ImageBuffer& scaffold_depth,
                                   const std::vector<SupportView>& supports, const RepairConfig& cfg);

/// All-ones map used for ground-truth views.
ConfidenceMap support_confidence(int width, int height, int view_id = 0);

}  // namespace confix
