#include "confix/providers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "confix/error.hpp"
#include "confix/image_io.hpp"
#include "confix/rasterizer.hpp"
#include "confix/scene_io.hpp"

namespace confix {

namespace {

std::string numbered(const char* prefix, int id) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.png", prefix, id);
  return buf;
}

void check_size(const ImageBuffer& img, const Camera& cam, const std::filesystem::path& path) {
  if (img.width() != cam.width || img.height() != cam.height) {
    throw ValidationError("view " + std::to_string(cam.view_id) + ": " + path.string() + " is " +
                          std::to_string(img.width()) + "x" + std::to_string(img.height()) + ", camera expects " +
                          std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
}

ImageBuffer as_rgb(const ImageBuffer& img) {
  if (img.channels() == 3) return img;
  ImageBuffer out(img.width(), img.height(), 3);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) out.data()[p * 3 + c] = img.data()[p];
  }
  return out;
}

}  // namespace

const char* to_string(TargetSource s) {
  switch (s) {
    case TargetSource::GroundTruth: return "ground-truth";
    case TargetSource::File: return "file";
    case TargetSource::SyntheticOracle: return "synthetic-oracle";
  }
  return "unknown";
}

GaussianScene load_initial_scene(const std::filesystem::path& path) { return load_scene(path); }

std::vector<ImageBuffer> load_gt_images(const std::filesystem::path& dir, const std::vector<Camera>& views,
                                        const std::function<bool(const Camera&)>& wanted) {
  std::vector<ImageBuffer> out(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (wanted && !wanted(views[i])) continue;
    const auto path = dir / numbered("img", views[i].view_id);
    if (!std::filesystem::exists(path)) {
      throw IoError("view " + std::to_string(views[i].view_id) + ": missing ground truth " + path.string());
    }
    out[i] = as_rgb(read_png(path));
    check_size(out[i], views[i], path);
  }
  return out;
}

PseudoTargetSet load_pseudo_targets(const std::filesystem::path& dir, const std::vector<Camera>& views,
                                    const std::vector<ImageBuffer>& gt, const WarningSink& warn) {
  if (gt.size() != views.size()) throw ContractError("load_pseudo_targets: gt list does not match views");
  PseudoTargetSet set;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Camera& cam = views[i];
    const auto path = dir / numbered("target", cam.view_id);
    if (cam.is_support) {
      if (warn && std::filesystem::exists(path)) {
        warn("view " + std::to_string(cam.view_id) + " is a support; ignoring " + path.string());
      }
      check_size(gt[i], cam, "ground truth");
      set.targets.push_back(gt[i]);
      set.sources.push_back(TargetSource::GroundTruth);
      continue;
    }
    if (!std::filesystem::exists(path)) {
      throw IoError("view " + std::to_string(cam.view_id) + ": missing pseudo-target " + path.string());
    }
    ImageBuffer img = as_rgb(read_png(path));
    check_size(img, cam, path);
    set.targets.push_back(std::move(img));
    set.sources.push_back(TargetSource::File);
  }
  return set;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * r + 1);
  for (int d = -r; d <= r; ++d) taps[d + r] = std::exp(-0.5 * d * d / (sigma * sigma));
  const int w = img.width(), h = img.height(), ch = img.channels();

  auto pass = [&](const ImageBuffer& in, bool along_x) {
    ImageBuffer out(w, h, ch);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < ch; ++c) {
          double acc = 0.0, norm = 0.0;
          for (int d = -r; d <= r; ++d) {
            const int xx = along_x ? x + d : x, yy = along_x ? y : y + d;
            if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
            acc += taps[d + r] * in(xx, yy, c);
            norm += taps[d + r];
          }
          out(x, y, c) = acc / norm;
        }
      }
    }
    return out;
  };
  return pass(pass(img, true), false);
}

PseudoTargetSet synthetic_oracle(const std::vector<ImageBuffer>& gt, const std::vector<Camera>& views,
                                 const Corruption& corruption) {
  if (gt.size() != views.size()) throw ContractError("synthetic_oracle: gt list does not match views");
  if (corruption.patch_count < 0 || corruption.patch_size < 0 || corruption.blur_sigma < 0.0) {
    throw ValidationError("synthetic_oracle: negative corruption parameter");
  }
  struct Patch {
    int x0, y0;
    Eigen::Vector3d sign;
  };
  std::mt19937_64 rng(corruption.rng_seed);
  auto draw_layout = [&](int w, int h) {
    if (corruption.patch_size > w || corruption.patch_size > h) {
      throw ValidationError("synthetic_oracle: patch of " + std::to_string(corruption.patch_size) +
                            " px does not fit a " + std::to_string(w) + "x" + std::to_string(h) + " image");
    }
    std::uniform_int_distribution<int> px(0, w - corruption.patch_size);
    std::uniform_int_distribution<int> py(0, h - corruption.patch_size);
    std::bernoulli_distribution coin(0.5);
    std::vector<Patch> layout;
    for (int k = 0; k < corruption.patch_count; ++k) {
      Patch p{px(rng), py(rng), Eigen::Vector3d::Ones()};
      for (int c = 0; c < 3; ++c) p.sign[c] = coin(rng) ? 1.0 : -1.0;
      layout.push_back(p);
    }
    return layout;
  };

  PseudoTargetSet set;
  std::vector<Patch> shared;
  bool have_shared = false;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Camera& cam = views[i];
    const ImageBuffer& truth = gt[i];
    if (truth.width() != cam.width || truth.height() != cam.height || truth.channels() != 3) {
      throw ValidationError("view " + std::to_string(cam.view_id) + ": ground truth does not match camera");
    }
    ImageBuffer mask(cam.width, cam.height, 1);
    if (cam.is_support) {
      set.targets.push_back(truth);
      set.sources.push_back(TargetSource::GroundTruth);
      set.masks.push_back(std::move(mask));
      continue;
    }
    std::vector<Patch> layout;
    if (corruption.shared_layout) {
      if (!have_shared) {
        shared = draw_layout(cam.width, cam.height);
        have_shared = true;
      }
      layout = shared;
    } else {
      layout = draw_layout(cam.width, cam.height);
    }
    // Later patches overwrite earlier ones; each pixel is shifted once.
    std::vector<int> owner(truth.pixel_count(), -1);
    for (int k = 0; k < static_cast<int>(layout.size()); ++k) {
      for (int y = layout[k].y0; y < layout[k].y0 + corruption.patch_size; ++y) {
        for (int x = layout[k].x0; x < layout[k].x0 + corruption.patch_size; ++x) {
          owner[static_cast<std::size_t>(y) * cam.width + x] = k;
        }
      }
    }
    ImageBuffer target = gaussian_blur(truth, corruption.blur_sigma);
    const double s = corruption.patch_color_shift;
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const int k = owner[static_cast<std::size_t>(y) * cam.width + x];
        if (k < 0 || s == 0.0) continue;
        mask(x, y) = 1.0;
        for (int c = 0; c < 3; ++c) {
          const double v = target(x, y, c);
          double dir = layout[k].sign[c];
          const double room = dir > 0 ? 1.0 - v : v;
          if (room < s && (dir > 0 ? v : 1.0 - v) > room) dir = -dir;
          target(x, y, c) = std::clamp(v + dir * s, 0.0, 1.0);
        }
      }
    }
    set.targets.push_back(std::move(target));
    set.sources.push_back(TargetSource::SyntheticOracle);
    set.masks.push_back(std::move(mask));
  }
  return set;
}

PlaneBenchmark make_plane_benchmark(const PlaneBenchmarkParams& prm) {
  if (prm.grid_x < 1 || prm.grid_y < 1 || prm.views < 1 || prm.support_stride < 1 || prm.image_size < 2) {
    throw ValidationError("plane benchmark: bad parameters");
  }
  PlaneBenchmark bench;
  const double sigma = 0.6 * prm.spacing;
  const double x_off = 0.5 * (prm.grid_x - 1) * prm.spacing;
  const double y_off = 0.5 * (prm.grid_y - 1) * prm.spacing;
  for (int j = 0; j < prm.grid_y; ++j) {
    for (int i = 0; i < prm.grid_x; ++i) {
      Gaussian<double> g;
      const double x = i * prm.spacing - x_off, y = j * prm.spacing - y_off;
      g.mean = Eigen::Vector3d(x, y, prm.depth);
      g.log_scale = Eigen::Vector3d(std::log(sigma), std::log(sigma), std::log(0.1 * sigma));
      g.rotation = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
      g.opacity_logit = logit(0.95);
      const bool check = ((i / 5) + (j / 5)) % 2 == 0;
      g.color = Eigen::Vector3d(0.5 + 0.3 * std::sin(1.3 * x + 0.4) + (check ? 0.12 : -0.12),
                                0.5 + 0.3 * std::cos(1.7 * y - 0.2),
                                0.5 + 0.25 * std::sin(0.9 * (x + y)) + (check ? -0.1 : 0.1));
      g.color = g.color.cwiseMax(0.02).cwiseMin(0.98);
      bench.ground_truth.gaussians.push_back(g);
    }
  }

  std::mt19937_64 rng(prm.seed);
  std::normal_distribution<double> noise(0.0, prm.color_noise);
  bench.initial = bench.ground_truth;
  for (auto& g : bench.initial.gaussians) {
    for (int c = 0; c < 3; ++c) g.color[c] = std::clamp(g.color[c] + noise(rng), 0.0, 1.0);
  }

  const double half = 0.5 * prm.image_size - 0.5;
  for (int v = 0; v < prm.views; ++v) {
    Camera cam;
    cam.intrinsics = make_intrinsics(prm.focal, prm.focal, half, half);
    const double u = prm.views > 1 ? static_cast<double>(v) / (prm.views - 1) - 0.5 : 0.0;
    cam.translation = Eigen::Vector3d(prm.baseline * u, 0.1 * std::sin(6.283185307179586 * u), 0.0);
    cam.width = cam.height = prm.image_size;
    cam.view_id = v;
    cam.is_support = v % prm.support_stride == 0;
    bench.cameras.push_back(cam);
  }
  for (const auto& cam : bench.cameras) bench.gt_images.push_back(render(bench.ground_truth, cam).rgb);
  return bench;
}

}  // namespace confix
