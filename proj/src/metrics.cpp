#include "confix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "confix/error.hpp"

namespace confix {

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "psnr");
  if (a.size() == 0) throw ValidationError("psnr: empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

void EvalReport::add(int view_id, const ImageBuffer& render, const ImageBuffer& gt) {
  views.push_back({view_id, psnr(render, gt), ssim(render, gt)});
  finalize();
}

void EvalReport::finalize() {
  mean_psnr = mean_ssim = 0.0;
  if (views.empty()) return;
  for (const auto& v : views) {
    mean_psnr += v.psnr;
    mean_ssim += v.ssim;
  }
  mean_psnr /= static_cast<double>(views.size());
  mean_ssim /= static_cast<double>(views.size());
}

std::string EvalReport::to_csv() const {
  std::string out = "view_id,psnr,ssim\n";
  char line[128];
  for (const auto& v : views) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", v.view_id, v.psnr, v.ssim);
    out += line;
  }
  std::snprintf(line, sizeof line, "mean,%.17g,%.17g\n", mean_psnr, mean_ssim);
  out += line;
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["views"] = nlohmann::ordered_json::array();
  for (const auto& v : views) j["views"].push_back({{"view_id", v.view_id}, {"psnr", v.psnr}, {"ssim", v.ssim}});
  j["count"] = views.size();
  j["mean_psnr"] = mean_psnr;
  j["mean_ssim"] = mean_ssim;
  return j.dump(2) + "\n";
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace confix
