#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "confix/camera.hpp"
#include "confix/gaussian.hpp"
#include "confix/image.hpp"

namespace confix {

enum class TargetSource { GroundTruth, File, SyntheticOracle };

const char* to_string(TargetSource s);

/// One target per camera, in camera order. Supports always carry their
/// ground truth. `masks` is filled by the synthetic oracle only: 1 where a
/// hallucinated patch was painted, 0 elsewhere.
struct PseudoTargetSet {
  std::vector<ImageBuffer> targets;
  std::vector<TargetSource> sources;
  std::vector<ImageBuffer> masks;

  std::size_t size() const { return targets.size(); }
};

/// Initial scene handed over by an external reconstruction backbone.
GaussianScene load_initial_scene(const std::filesystem::path& path);

/// Ground-truth images `img_XXXX.png` for the given views. Views for which
/// `wanted` returns false are skipped and left empty.
std::vector<ImageBuffer> load_gt_images(const std::filesystem::path& dir, const std::vector<Camera>& views,
                                        const std::function<bool(const Camera&)>& wanted = {});

using WarningSink = std::function<void(const std::string&)>;

/// Reads `target_XXXX.png` for every novel view and takes `gt[i]` for every
/// support. A target file present for a support is ignored with a warning.
PseudoTargetSet load_pseudo_targets(const std::filesystem::path& dir, const std::vector<Camera>& views,
                                    const std::vector<ImageBuffer>& gt, const WarningSink& warn = {});

struct Corruption {
  double blur_sigma = 1.0;  ///< px; 0 disables the blur
  int patch_count = 5;
  int patch_size = 16;      ///< px, square
  double patch_color_shift = 0.5;
  std::uint64_t rng_seed = 0;
  /// Paint every novel view's patches at the same pixel rectangles with the
  /// same colour shifts, mimicking a generator that repeats its mistakes.
  bool shared_layout = false;
};

/// Stand-in for a generative enhancer: novel targets are the ground truth
/// blurred, then overpainted with colour-shifted rectangles. Each channel of
/// a patch moves by the shift in the direction with more headroom, then is
/// clamped to [0,1], so with no blur the mask is exactly where target != gt.
PseudoTargetSet synthetic_oracle(const std::vector<ImageBuffer>& gt, const std::vector<Camera>& views,
                                 const Corruption& corruption);

/// Separable Gaussian blur truncated at 3 sigma and renormalised at borders.
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

/// Textured plane of Gaussians viewed by a row of forward-facing cameras.
struct PlaneBenchmarkParams {
  int grid_x = 50;
  int grid_y = 40;
  double spacing = 0.08;
  double depth = 3.0;
  int image_size = 64;
  double focal = 64.0;
  int views = 50;
  int support_stride = 5;    ///< view i is a support when i % stride == 0
  double baseline = 0.8;     ///< x extent of the camera row
  double color_noise = 0.15; ///< std of the per-Gaussian colour error in the initial scene
  std::uint64_t seed = 0;
};

struct PlaneBenchmark {
  GaussianScene ground_truth;
  GaussianScene initial;
  std::vector<Camera> cameras;
  std::vector<ImageBuffer> gt_images;
};

PlaneBenchmark make_plane_benchmark(const PlaneBenchmarkParams& params);

}  // namespace confix
