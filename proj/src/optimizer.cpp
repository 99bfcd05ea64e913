#include "confix/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "confix/error.hpp"

namespace confix {

ParamVector pack(const Gaussian<double>& g) {
  ParamVector p;
  p << g.mean, g.log_scale, g.rotation, g.opacity_logit, g.color;
  return p;
}

ParamVector pack(const GradientBundle& grads, std::size_t i) {
  ParamVector p;
  p << grads.mean[i], grads.log_scale[i], grads.rotation[i], grads.opacity_logit[i], grads.color[i];
  return p;
}

namespace {

void unpack(const ParamVector& p, Gaussian<double>& g) {
  g.mean = p.segment<3>(0);
  g.log_scale = p.segment<3>(3);
  g.rotation = p.segment<4>(6);
  g.opacity_logit = p[10];
  g.color = p.segment<3>(11);
}

ParamVector learning_rates(const RepairConfig& cfg) {
  ParamVector lr;
  lr << Eigen::Vector3d::Constant(cfg.lr_position), Eigen::Vector3d::Constant(cfg.lr_log_scale),
      Eigen::Vector4d::Constant(cfg.lr_rotation), cfg.lr_opacity_logit, Eigen::Vector3d::Constant(cfg.lr_color);
  return lr;
}

}  // namespace

void validate(const RepairConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("config: ") + what);
  };
  require(cfg.iterations >= 0, "iterations must be >= 0");
  require(cfg.densify_interval > 0, "densify_interval must be > 0");
  require(cfg.iterations % cfg.densify_interval == 0, "densify_interval must divide iterations");
  require(cfg.batch_size > 0, "batch_size must be > 0");
  require(cfg.lr_position > 0 && cfg.lr_color > 0 && cfg.lr_log_scale > 0 && cfg.lr_rotation > 0 &&
              cfg.lr_opacity_logit > 0,
          "learning rates must be > 0");
  require(cfg.lambda_ssim >= 0.0 && cfg.lambda_ssim <= 1.0, "lambda_ssim must be in [0,1]");
  require(cfg.lambda_gt >= 0.0, "lambda_gt must be >= 0");
  require(cfg.sigma_e > 0.0, "sigma_e must be > 0");
  require(cfg.gamma >= 0.0 && cfg.gamma <= 1.0, "gamma must be in [0,1]");
  require(cfg.alpha_min >= 0.0 && cfg.alpha_min <= 1.0, "alpha_min must be in [0,1]");
  require(cfg.smooth_k >= 1 && cfg.smooth_k % 2 == 1, "smooth_k must be odd and >= 1");
  require(cfg.densify_grad_threshold > 0.0, "densify_grad_threshold must be > 0");
  require(cfg.prune_opacity >= 0.0 && cfg.prune_opacity < 1.0, "prune_opacity must be in [0,1)");
  require(cfg.split_scale_fraction > 0.0, "split_scale_fraction must be > 0");
  require(cfg.densify_stop_fraction >= 0.0 && cfg.densify_stop_fraction <= 1.0,
          "densify_stop_fraction must be in [0,1]");
  require(cfg.split_scale_divisor > 1.0, "split_scale_divisor must be > 1");
  require(cfg.split_children >= 1, "split_children must be >= 1");
  require(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0 && cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0,
          "adam betas must be in [0,1)");
  require(cfg.adam_epsilon > 0.0, "adam_epsilon must be > 0");
  require(cfg.background.allFinite(), "background must be finite");
}

void adam_step(GaussianScene& scene, const GradientBundle& grads, AdamState& state, const RepairConfig& cfg) {
  const std::size_t n = scene.size();
  if (grads.size() != n || state.size() != n) {
    throw ContractError("adam_step: scene, gradients and optimiser state have different sizes");
  }
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const ParamVector lr = learning_rates(cfg);
  for (std::size_t i = 0; i < n; ++i) {
    const ParamVector g = pack(grads, i);
    ParamVector& m = state.first[i];
    ParamVector& v = state.second[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const ParamVector update =
        lr.cwiseProduct((m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + cfg.adam_epsilon).matrix()));
    if (update.isZero(0.0)) continue;
    Gaussian<double>& gs = scene.gaussians[i];
    ParamVector p = pack(gs);
    p -= update;
    unpack(p, gs);
    if (!update.segment<4>(6).isZero(0.0)) gs.rotation.normalize();
  }
}

void DensifyStats::resize(std::size_t n) {
  accum_grad_norm.assign(n, 0.0);
  seen_count.assign(n, 0);
  max_radius.assign(n, 0.0);
  mean_grad.assign(n, Eigen::Vector3d::Zero());
}

void DensifyStats::reset() { resize(size()); }

double DensifyStats::mean_grad_norm(std::size_t i) const {
  return seen_count[i] > 0 ? accum_grad_norm[i] / seen_count[i] : 0.0;
}

void accumulate_densify_stats(DensifyStats& stats, const std::vector<Eigen::Vector2d>& pos2d_grads,
                              const std::vector<std::uint8_t>& touched) {
  if (pos2d_grads.size() != stats.size() || touched.size() != stats.size()) {
    throw ContractError("accumulate_densify_stats: size mismatch");
  }
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (!touched[i]) continue;
    stats.accum_grad_norm[i] += pos2d_grads[i].norm();
    ++stats.seen_count[i];
  }
}

void accumulate_densify_stats(DensifyStats& stats, const GradientBundle& grads, const BlendState& blend) {
  accumulate_densify_stats(stats, grads.pos2d, grads.touched);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (!grads.touched[i]) continue;
    stats.mean_grad[i] += grads.mean[i];
    stats.max_radius[i] = std::max(stats.max_radius[i], blend.splats[i].radius);
  }
}

TopologyReport densify_and_prune(GaussianScene& scene, DensifyStats& stats, AdamState& adam,
                                 const RepairConfig& cfg, double extent, std::mt19937_64& rng) {
  const std::size_t n = scene.size();
  if (stats.size() != n || adam.size() != n) {
    throw ContractError("densify_and_prune: scene, stats and optimiser state have different sizes");
  }
  TopologyReport report;
  const double split_limit = cfg.split_scale_fraction * extent;
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Gaussian<double>> added;
  std::vector<std::uint8_t> drop(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(stats.mean_grad_norm(i) > cfg.densify_grad_threshold)) continue;
    const Gaussian<double>& g = scene.gaussians[i];
    const Eigen::Vector3d scale = g.log_scale.array().exp();
    if (scale.maxCoeff() <= split_limit) {
      Gaussian<double> copy = g;
      const double dn = stats.mean_grad[i].norm();
      if (dn > 0.0) copy.mean -= cfg.clone_offset_fraction * scale.maxCoeff() * stats.mean_grad[i] / dn;
      added.push_back(copy);
      report.cloned.push_back(static_cast<std::uint32_t>(i));
    } else {
      const Mat3<double> rot = quaternion_to_matrix(g.rotation);
      for (int c = 0; c < cfg.split_children; ++c) {
        const Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
        Gaussian<double> child = g;
        child.mean = g.mean + rot * scale.cwiseProduct(z);
        child.log_scale = (scale / cfg.split_scale_divisor).array().log();
        added.push_back(child);
      }
      drop[i] = 1;
      report.split.push_back(static_cast<std::uint32_t>(i));
    }
  }
  report.clones = static_cast<int>(report.cloned.size());
  report.splits = static_cast<int>(report.split.size());

  GaussianScene next;
  AdamState next_adam;
  next_adam.step = adam.step;
  for (std::size_t i = 0; i < n; ++i) {
    if (drop[i]) continue;
    if (sigmoid(scene.gaussians[i].opacity_logit) < cfg.prune_opacity) {
      report.pruned.push_back(static_cast<std::uint32_t>(i));
      continue;
    }
    next.gaussians.push_back(scene.gaussians[i]);
    next_adam.first.push_back(adam.first[i]);
    next_adam.second.push_back(adam.second[i]);
  }
  for (std::size_t k = 0; k < added.size(); ++k) {
    if (sigmoid(added[k].opacity_logit) < cfg.prune_opacity) {
      report.pruned.push_back(static_cast<std::uint32_t>(n + k));
      continue;
    }
    next.gaussians.push_back(added[k]);
    next_adam.first.push_back(ParamVector::Zero());
    next_adam.second.push_back(ParamVector::Zero());
  }
  report.prunes = static_cast<int>(report.pruned.size());
  scene = std::move(next);
  adam = std::move(next_adam);
  stats.resize(scene.size());
  report.count = scene.size();
  return report;
}

double scene_extent(const std::vector<Camera>& cams) {
  if (cams.empty()) return 1.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& c : cams) centroid += c.center();
  centroid /= static_cast<double>(cams.size());
  double r = 0.0;
  for (const auto& c : cams) r = std::max(r, (c.center() - centroid).norm());
  return r > 1e-9 ? r : 1.0;
}

RepairResult repair(const GaussianScene& initial, const std::vector<Camera>& views,
                    const std::vector<ImageBuffer>& targets, const std::vector<ConfidenceMap>& confidences,
                    const RepairConfig& cfg, const StepObserver& observer) {
  validate(cfg);
  if (views.empty()) throw ContractError("repair: no views");
  if (targets.size() != views.size() || confidences.size() != views.size()) {
    throw ContractError("repair: every view needs a target and a confidence map");
  }
  for (std::size_t v = 0; v < views.size(); ++v) {
    const Camera& cam = views[v];
    if (targets[v].width() != cam.width || targets[v].height() != cam.height || targets[v].channels() != 3) {
      throw ContractError("repair: target of view " + std::to_string(cam.view_id) + " missing or mis-sized");
    }
    if (confidences[v].weights.width() != cam.width || confidences[v].weights.height() != cam.height) {
      throw ContractError("repair: confidence of view " + std::to_string(cam.view_id) + " missing or mis-sized");
    }
  }

  RepairResult result;
  result.scene = initial;
  GaussianScene& scene = result.scene;
  AdamState adam(scene.size());
  DensifyStats stats(scene.size());
  std::mt19937_64 rng(cfg.rng_seed);
  const double extent = scene_extent(views);
  const int batch = std::min<int>(cfg.batch_size, static_cast<int>(views.size()));
  const double densify_stop = cfg.densify_stop_fraction * cfg.iterations;

  std::vector<int> pool(views.size());
  for (int step = 1; step <= cfg.iterations; ++step) {
    // Uniform sample without replacement: partial Fisher-Yates.
    std::iota(pool.begin(), pool.end(), 0);
    for (int k = 0; k < batch; ++k) {
      std::uniform_int_distribution<int> pick(k, static_cast<int>(pool.size()) - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }

    std::vector<RenderOutput> renders;
    renders.reserve(batch);
    std::vector<BatchItem> items;
    for (int k = 0; k < batch; ++k) {
      const int v = pool[k];
      renders.push_back(render(scene, views[v], cfg.background, cfg.raster));
    }
    for (int k = 0; k < batch; ++k) {
      const int v = pool[k];
      items.push_back({&views[v], &renders[k].rgb, &targets[v], &confidences[v].weights});
    }
    const LossReport loss = batch_loss(items, cfg);
    result.losses.push_back({step, loss.l1_term, loss.ssim_term, loss.target_loss, loss.gt_loss, loss.total});

    GradientBundle total(scene.size());
    for (int k = 0; k < batch; ++k) {
      const GradientBundle g =
          render_backward(scene, views[pool[k]], renders[k], loss.per_pixel_grad[k], cfg.raster);
      accumulate_densify_stats(stats, g, renders[k].blend_state);
      total.accumulate(g);
    }
    adam_step(scene, total, adam, cfg);

    if (step % cfg.densify_interval == 0 && step <= densify_stop) {
      TopologyReport event = densify_and_prune(scene, stats, adam, cfg, extent, rng);
      event.step = step;
      result.topology.push_back(std::move(event));
    }
    if (observer) observer(step, scene);
  }
  return result;
}

}  // namespace confix
