#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "confix/error.hpp"

namespace confix {

/// Dense row-major image with interleaved channels: element (x, y, c) lives at
/// data[(y * width + x) * channels + c].
template <typename Scalar>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, Scalar fill = Scalar(0))
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || (channels != 1 && channels != 3)) {
      throw ValidationError("image: bad shape " + std::to_string(width) + "x" +
                            std::to_string(height) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar& operator()(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  Scalar operator()(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  /// RGB triple at (x, y); only valid for 3-channel images.
  Eigen::Matrix<Scalar, 3, 1> rgb(int x, int y) const {
    const Scalar* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set_rgb(int x, int y, const Eigen::Matrix<Scalar, 3, 1>& v) {
    Scalar* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 3];
    p[0] = v[0];
    p[1] = v[1];
    p[2] = v[2];
  }

  std::vector<Scalar>& data() { return data_; }
  const std::vector<Scalar>& data() const { return data_; }

  /// Flat view for whole-image arithmetic.
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> flat() {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> flat() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  bool all_finite() const {
    for (Scalar v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<Scalar> data_;
};

using ImageBuffer = Image<double>;

inline void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(what) + ": image shape mismatch (" +
                        std::to_string(a.width()) + "x" + std::to_string(a.height()) + "x" +
                        std::to_string(a.channels()) + " vs " + std::to_string(b.width()) + "x" +
                        std::to_string(b.height()) + "x" + std::to_string(b.channels()) + ")");
  }
}

}  // namespace confix
