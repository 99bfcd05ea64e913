#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "confix/camera.hpp"
#include "confix/gaussian.hpp"
#include "confix/image.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("confix_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline confix::Camera forward_camera(int w, int h, double f, const Eigen::Vector3d& center = Eigen::Vector3d::Zero(),
                                     int id = 0, bool support = false) {
  confix::Camera cam;
  cam.intrinsics = confix::make_intrinsics(f, f, 0.5 * w - 0.5, 0.5 * h - 0.5);
  cam.translation = center;
  cam.width = w;
  cam.height = h;
  cam.view_id = id;
  cam.is_support = support;
  return cam;
}

/// Gaussian in front of a forward camera, parameters away from saturation.
inline confix::Gaussian<double> random_gaussian(std::mt19937_64& rng, double depth = 3.0, double spread = 0.6) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  confix::Gaussian<double> g;
  g.mean = Eigen::Vector3d(spread * u(rng), spread * u(rng), depth + 0.5 * u(rng));
  g.log_scale = Eigen::Vector3d(std::log(0.12 + 0.05 * u(rng)), std::log(0.12 + 0.05 * u(rng)),
                                std::log(0.08 + 0.03 * u(rng)));
  g.rotation = Eigen::Vector4d(1.0 + 0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng)).normalized();
  g.opacity_logit = confix::logit(0.45 + 0.25 * u(rng));
  g.color = Eigen::Vector3d(0.5 + 0.3 * u(rng), 0.5 + 0.3 * u(rng), 0.5 + 0.3 * u(rng));
  return g;
}

inline confix::ImageBuffer random_image(std::mt19937_64& rng, int w, int h, int ch, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  confix::ImageBuffer img(w, h, ch);
  for (double& v : img.data()) v = u(rng);
  return img;
}

}  // namespace testing
