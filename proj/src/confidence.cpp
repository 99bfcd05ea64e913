#include "confix/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "confix/error.hpp"
#include "confix/parallel.hpp"

namespace confix {

double ConfidenceMap::mean() const {
  if (weights.empty()) return 0.0;
  return weights.flat().mean();
}

double raw_confidence(double e, int valid_count, double alpha, const RepairConfig& cfg) {
  if (alpha < cfg.alpha_min) return 0.0;
  if (valid_count <= 0) return cfg.gamma;
  return std::exp(-(e * e) / (2.0 * cfg.sigma_e * cfg.sigma_e));
}

ImageBuffer smooth_confidence(const ImageBuffer& raw, int k) {
  if (k < 1 || k % 2 == 0) throw ValidationError("smooth_confidence: kernel size must be odd and >= 1");
  if (raw.channels() != 1) throw ContractError("smooth_confidence: single-channel input required");
  const int w = raw.width(), h = raw.height(), r = k / 2;

  // Separable direct window sums. Each output depends only on its own
  // window, so a local edit never perturbs pixels outside its k-halo.
  ImageBuffer rows(w, h, 1);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      double sum = 0.0;
      for (int xx = x0; xx <= x1; ++xx) sum += raw(xx, y);
      rows(x, y) = sum / (x1 - x0 + 1);
    }
  });
  ImageBuffer out(w, h, 1);
  parallel_for(h, [&](int y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int yy = y0; yy <= y1; ++yy) sum += rows(x, yy);
      out(x, y) = std::clamp(sum / (y1 - y0 + 1), 0.0, 1.0);
    }
  });
  return out;
}

ConfidenceMap build_confidence_map(const ImageBuffer& pseudo, const Camera& pseudo_cam,
                                   const ImageBuffer& scaffold_alpha, const ImageBuffer& scaffold_depth,
                                   const std::vector<SupportView>& supports, const RepairConfig& cfg) {
  const int w = pseudo.width(), h = pseudo.height();
  if (pseudo.channels() != 3) throw ContractError("build_confidence_map: pseudo-target must be RGB");
  if (w != pseudo_cam.width || h != pseudo_cam.height || scaffold_alpha.width() != w ||
      scaffold_alpha.height() != h || scaffold_depth.width() != w || scaffold_depth.height() != h) {
    throw ContractError("build_confidence_map: pseudo-target, camera and scaffold dimensions differ (view " +
                        std::to_string(pseudo_cam.view_id) + ")");
  }
  ConfidenceMap map;
  map.view_id = pseudo_cam.view_id;
  map.raw = ImageBuffer(w, h, 1);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double alpha = scaffold_alpha(x, y);
      const double depth = scaffold_depth(x, y);
      if (alpha < cfg.alpha_min || !(depth > 0.0)) {
        map.raw(x, y) = 0.0;
        continue;
      }
      const Consensus cons = consensus_color(Eigen::Vector2d(x, y), pseudo_cam, depth, supports);
      const double e = cons.valid_count > 0 ? discrepancy(pseudo.rgb(x, y), cons.color) : 0.0;
      map.raw(x, y) = raw_confidence(e, cons.valid_count, alpha, cfg);
    }
  });
  map.weights = smooth_confidence(map.raw, cfg.smooth_k);
  for (double v : map.weights.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("build_confidence_map: weight outside [0,1]");
  }
  return map;
}

ConfidenceMap build_confidence_map(const ImageBuffer& pseudo, const Camera& pseudo_cam,
                                   const RenderOutput& scaffold_render,
                                   const std::vector<SupportView>& supports, const RepairConfig& cfg) {
  return build_confidence_map(pseudo, pseudo_cam, scaffold_render.alpha, scaffold_render.depth, supports, cfg);
}

ConfidenceMap support_confidence(int width, int height, int view_id) {
  if (width <= 0 || height <= 0) throw ValidationError("support_confidence: dimensions must be positive");
  ConfidenceMap map;
  map.view_id = view_id;
  map.weights = ImageBuffer(width, height, 1, 1.0);
  map.raw = ImageBuffer(width, height, 1, 1.0);
  return map;
}

}  // namespace confix
