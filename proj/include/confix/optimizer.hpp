#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "confix/camera.hpp"
#include "confix/confidence.hpp"
#include "confix/gaussian.hpp"
#include "confix/objective.hpp"
#include "confix/rasterizer.hpp"
#include "confix/repair_config.hpp"

namespace confix {

/// Flattened parameters of one Gaussian: mean(3) log_scale(3) rotation(4)
/// opacity_logit(1) color(3).
using ParamVector = Eigen::Matrix<double, 14, 1>;

ParamVector pack(const Gaussian<double>& g);
ParamVector pack(const GradientBundle& grads, std::size_t i);

/// Adam moments, one row per Gaussian in scene order.
struct AdamState {
  std::vector<ParamVector> first;
  std::vector<ParamVector> second;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n = 0)
      : first(n, ParamVector::Zero()), second(n, ParamVector::Zero()) {}
  std::size_t size() const { return first.size(); }
};

/// One bias-corrected Adam update with per-group learning rates. A
/// quaternion is renormalised only when its update is non-zero, so a
/// Gaussian that never receives gradient stays bit-identical.
void adam_step(GaussianScene& scene, const GradientBundle& grads, AdamState& state, const RepairConfig& cfg);

/// Running densification statistics.
struct DensifyStats {
  std::vector<double> accum_grad_norm;  ///< sum of per-view ||dL/d mean2d||
  std::vector<int> seen_count;          ///< views in which the Gaussian was visible
  std::vector<double> max_radius;       ///< largest screen radius seen, px
  std::vector<Eigen::Vector3d> mean_grad;  ///< summed world-space mean gradient, for clone offsets

  explicit DensifyStats(std::size_t n = 0) { resize(n); }
  void resize(std::size_t n);
  void reset();
  std::size_t size() const { return accum_grad_norm.size(); }
  /// Running mean over views where the Gaussian was visible (0 if never seen).
  double mean_grad_norm(std::size_t i) const;
};

/// Adds one view's contribution. pos2d_grads must come from a backward pass
/// whose pixel gradient already carried the confidence weights.
void accumulate_densify_stats(DensifyStats& stats, const std::vector<Eigen::Vector2d>& pos2d_grads,
                              const std::vector<std::uint8_t>& touched);

/// Full-bundle variant that also records world-space mean gradients and radii.
void accumulate_densify_stats(DensifyStats& stats, const GradientBundle& grads, const BlendState& blend);

struct TopologyReport {
  int step = 0;
  int clones = 0;
  int splits = 0;
  int prunes = 0;
  std::size_t count = 0;  ///< N after the event
  /// Pre-event indices of the Gaussians acted on.
  std::vector<std::uint32_t> cloned;
  std::vector<std::uint32_t> split;
  std::vector<std::uint32_t> pruned;
};

/// Clone (small) or split (large) Gaussians whose mean gradient norm exceeds
/// the threshold, then drop those below prune_opacity. Survivors keep their
/// relative order and their Adam moments; new Gaussians are appended with
/// zero moments. Stats are resized and reset.
TopologyReport densify_and_prune(GaussianScene& scene, DensifyStats& stats, AdamState& adam,
                                 const RepairConfig& cfg, double scene_extent, std::mt19937_64& rng);

/// Radius of the bounding sphere (about the centroid) of the camera centers.
double scene_extent(const std::vector<Camera>& cams);

/// One line of the training log.
struct LossRecord {
  int step = 0;
  double l1 = 0.0;
  double ssim = 0.0;
  double target = 0.0;
  double gt = 0.0;
  double total = 0.0;
};

struct RepairResult {
  GaussianScene scene;
  std::vector<LossRecord> losses;
  std::vector<TopologyReport> topology;
};

/// Observer called after every optimiser step with the step number (1-based).
using StepObserver = std::function<void(int step, const GaussianScene& scene)>;

/// Confidence-gated repair. views, targets and confidences are parallel
/// arrays over all views; support views carry their ground truth as target
/// and an all-ones confidence map.
RepairResult repair(const GaussianScene& initial, const std::vector<Camera>& views,
                    const std::vector<ImageBuffer>& targets, const std::vector<ConfidenceMap>& confidences,
                    const RepairConfig& cfg, const StepObserver& observer = {});

}  // namespace confix
