#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "confix/image.hpp"
#include "confix/ssim.hpp"

namespace confix {

/// Reported for identical images.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) with unit peak.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

struct ViewScore {
  int view_id = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<ViewScore> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  std::size_t count() const { return views.size(); }
  void add(int view_id, const ImageBuffer& render, const ImageBuffer& gt);
  /// Recomputes the aggregates in view order.
  void finalize();

  std::string to_csv() const;
  std::string to_json() const;
};

void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace confix
