#include "confix/pipeline.hpp"

#include "confix/error.hpp"
#include "confix/parallel.hpp"

namespace confix {

std::vector<ConfidenceMap> compute_confidences(const std::vector<RenderOutput>& scaffold_renders,
                                               const std::vector<Camera>& views,
                                               const std::vector<ImageBuffer>& targets,
                                               const std::vector<ImageBuffer>& support_gt, const RepairConfig& cfg) {
  if (scaffold_renders.size() != views.size() || targets.size() != views.size() ||
      support_gt.size() != views.size()) {
    throw ContractError("compute_confidences: per-view inputs have different lengths");
  }
  std::vector<SupportView> supports;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].is_support) supports.push_back({&views[i], &support_gt[i]});
  }
  std::vector<ConfidenceMap> maps;
  maps.reserve(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Camera& cam = views[i];
    if (cam.is_support) {
      maps.push_back(support_confidence(cam.width, cam.height, cam.view_id));
    } else {
      maps.push_back(build_confidence_map(targets[i], cam, scaffold_renders[i], supports, cfg));
    }
  }
  return maps;
}

std::vector<ConfidenceMap> compute_confidences(const GaussianScene& scaffold, const std::vector<Camera>& views,
                                               const std::vector<ImageBuffer>& targets,
                                               const std::vector<ImageBuffer>& support_gt, const RepairConfig& cfg,
                                               bool uniform) {
  if (uniform) {
    std::vector<ConfidenceMap> maps;
    for (const auto& cam : views) maps.push_back(support_confidence(cam.width, cam.height, cam.view_id));
    return maps;
  }
  std::vector<RenderOutput> renders;
  renders.reserve(views.size());
  for (const auto& cam : views) renders.push_back(render(scaffold, cam, cfg.background, cfg.raster));
  return compute_confidences(renders, views, targets, support_gt, cfg);
}

EvalReport evaluate_novel_views(const GaussianScene& scene, const std::vector<Camera>& views,
                                const std::vector<ImageBuffer>& gt, const Eigen::Vector3d& background,
                                const RasterConfig& raster) {
  if (gt.size() != views.size()) throw ContractError("evaluate_novel_views: gt list does not match views");
  EvalReport report;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].is_support) continue;
    report.views.push_back({views[i].view_id, 0.0, 0.0});
  }
  // Each slot is written by exactly one task; aggregates are summed in order.
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!views[i].is_support) index.push_back(i);
  }
  parallel_for(static_cast<int>(index.size()), [&](int k) {
    const std::size_t i = index[k];
    const ImageBuffer img = render(scene, views[i], background, raster).rgb;
    report.views[k].psnr = psnr(img, gt[i]);
    report.views[k].ssim = ssim(img, gt[i]);
  });
  report.finalize();
  return report;
}

AblationRun run_plane_ablation(PlaneBenchmarkParams bench, Corruption corruption, RepairConfig cfg,
                               std::uint64_t seed) {
  bench.seed = seed;
  corruption.rng_seed = seed;
  cfg.rng_seed = seed;
  const PlaneBenchmark b = make_plane_benchmark(bench);
  const PseudoTargetSet targets = synthetic_oracle(b.gt_images, b.cameras, corruption);

  AblationRun run;
  run.seed = seed;
  run.initial_psnr = evaluate_novel_views(b.initial, b.cameras, b.gt_images, cfg.background, cfg.raster).mean_psnr;

  const auto weighted = compute_confidences(b.initial, b.cameras, targets.targets, b.gt_images, cfg);
  double sum = 0.0;
  int novels = 0;
  for (std::size_t i = 0; i < b.cameras.size(); ++i) {
    if (b.cameras[i].is_support) continue;
    sum += weighted[i].mean();
    ++novels;
  }
  run.novel_confidence = novels > 0 ? sum / novels : 0.0;
  const auto uniform = compute_confidences(b.initial, b.cameras, targets.targets, b.gt_images, cfg, true);

  const GaussianScene w = repair(b.initial, b.cameras, targets.targets, weighted, cfg).scene;
  run.weighted_psnr = evaluate_novel_views(w, b.cameras, b.gt_images, cfg.background, cfg.raster).mean_psnr;
  const GaussianScene u = repair(b.initial, b.cameras, targets.targets, uniform, cfg).scene;
  run.uniform_psnr = evaluate_novel_views(u, b.cameras, b.gt_images, cfg.background, cfg.raster).mean_psnr;
  return run;
}

}  // namespace confix
