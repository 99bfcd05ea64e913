#pragma once

#include <vector>

#include "confix/camera.hpp"
#include "confix/confidence.hpp"
#include "confix/metrics.hpp"
#include "confix/optimizer.hpp"
#include "confix/providers.hpp"
#include "confix/rasterizer.hpp"

namespace confix {

/// Renders the scaffold at every pseudo view and scores its target against
/// the supports. Supports get all-ones maps. With `uniform` every map is all
/// ones and nothing is rendered.
std::vector<ConfidenceMap> compute_confidences(const GaussianScene& scaffold, const std::vector<Camera>& views,
                                               const std::vector<ImageBuffer>& targets,
                                               const std::vector<ImageBuffer>& support_gt, const RepairConfig& cfg,
                                               bool uniform = false);

/// Same, reusing scaffold renders already computed for every view.
std::vector<ConfidenceMap> compute_confidences(const std::vector<RenderOutput>& scaffold_renders,
                                               const std::vector<Camera>& views,
                                               const std::vector<ImageBuffer>& targets,
                                               const std::vector<ImageBuffer>& support_gt, const RepairConfig& cfg);

/// PSNR/SSIM of the scene against ground truth on the non-support views.
EvalReport evaluate_novel_views(const GaussianScene& scene, const std::vector<Camera>& views,
                                const std::vector<ImageBuffer>& gt, const Eigen::Vector3d& background,
                                const RasterConfig& raster = {});

struct AblationRun {
  std::uint64_t seed = 0;
  double initial_psnr = 0.0;
  double weighted_psnr = 0.0;
  double uniform_psnr = 0.0;
  double novel_confidence = 0.0;  ///< mean weight over novel views
};

/// One paired run on the synthetic plane: build the benchmark and the
/// oracle targets from `seed`, then repair with confidence weights and with
/// all-ones weights from the same initial scene.
AblationRun run_plane_ablation(PlaneBenchmarkParams bench, Corruption corruption, RepairConfig cfg,
                               std::uint64_t seed);

}  // namespace confix
