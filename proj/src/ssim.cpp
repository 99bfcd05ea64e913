#include "confix/ssim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace confix {

namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, 2 * kRadius + 1>& window() {
  static const auto taps = [] {
    std::array<double, 2 * kRadius + 1> t{};
    for (int i = -kRadius; i <= kRadius; ++i) t[i + kRadius] = std::exp(-0.5 * i * i / (kSigma * kSigma));
    return t;
  }();
  return taps;
}

/// Normalised taps for each output position of a line of length len; taps
/// falling outside the line are dropped and the rest renormalised.
std::vector<double> line_weights(int len) {
  const auto& g = window();
  std::vector<double> wts(static_cast<std::size_t>(len) * (2 * kRadius + 1), 0.0);
  for (int i = 0; i < len; ++i) {
    double s = 0.0;
    for (int d = -kRadius; d <= kRadius; ++d) {
      if (i + d >= 0 && i + d < len) s += g[d + kRadius];
    }
    for (int d = -kRadius; d <= kRadius; ++d) {
      if (i + d >= 0 && i + d < len) wts[static_cast<std::size_t>(i) * (2 * kRadius + 1) + d + kRadius] = g[d + kRadius] / s;
    }
  }
  return wts;
}

/// Truncated-and-renormalised 1D Gaussian filter along one axis of a w x h
/// scalar field. `transpose` applies the adjoint operator.
void filter_axis(const std::vector<double>& in, std::vector<double>& out, int w, int h, bool along_x,
                 bool transpose) {
  constexpr int taps = 2 * kRadius + 1;
  const int len = along_x ? w : h;
  const std::vector<double> wts = line_weights(len);
  out.assign(in.size(), 0.0);
  if (along_x) {
    for (int y = 0; y < h; ++y) {
      const double* src = in.data() + static_cast<std::size_t>(y) * w;
      double* dst = out.data() + static_cast<std::size_t>(y) * w;
      for (int i = 0; i < w; ++i) {
        const double* wi = wts.data() + static_cast<std::size_t>(i) * taps;
        const int lo = std::max(-kRadius, -i), hi = std::min(kRadius, w - 1 - i);
        if (transpose) {
          for (int d = lo; d <= hi; ++d) dst[i + d] += wi[d + kRadius] * src[i];
        } else {
          double acc = 0.0;
          for (int d = lo; d <= hi; ++d) acc += wi[d + kRadius] * src[i + d];
          dst[i] = acc;
        }
      }
    }
    return;
  }
  for (int i = 0; i < h; ++i) {
    const double* wi = wts.data() + static_cast<std::size_t>(i) * taps;
    const int lo = std::max(-kRadius, -i), hi = std::min(kRadius, h - 1 - i);
    for (int d = lo; d <= hi; ++d) {
      const double wgt = wi[d + kRadius];
      const double* src = in.data() + static_cast<std::size_t>(transpose ? i : i + d) * w;
      double* dst = out.data() + static_cast<std::size_t>(transpose ? i + d : i) * w;
      for (int x = 0; x < w; ++x) dst[x] += wgt * src[x];
    }
  }
}

std::vector<double> blur(const std::vector<double>& in, int w, int h) {
  std::vector<double> tmp, out;
  filter_axis(in, tmp, w, h, true, false);
  filter_axis(tmp, out, w, h, false, false);
  return out;
}

std::vector<double> blur_adjoint(const std::vector<double>& in, int w, int h) {
  std::vector<double> tmp, out;
  filter_axis(in, tmp, w, h, false, true);
  filter_axis(tmp, out, w, h, true, true);
  return out;
}

std::vector<double> channel(const ImageBuffer& img, int c) {
  std::vector<double> v(img.pixel_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.data()[i * img.channels() + c];
  return v;
}

SsimGradient compute(const ImageBuffer& a, const ImageBuffer& b, bool want_grad) {
  require_same_shape(a, b, "ssim");
  const int w = a.width(), h = a.height(), ch = a.channels();
  const std::size_t n = a.pixel_count();
  SsimGradient result;
  if (want_grad) result.d_a = ImageBuffer(w, h, ch);
  if (n == 0) return result;
  const double scale = 1.0 / (static_cast<double>(n) * ch);

  for (int c = 0; c < ch; ++c) {
    const std::vector<double> x = channel(a, c), y = channel(b, c);
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x, w, h), my = blur(y, w, h);
    const auto exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);
    std::vector<double> d_mu(n), d_exx(n), d_exy(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double vx = exx[i] - mx[i] * mx[i];
      const double vy = eyy[i] - my[i] * my[i];
      const double cxy = exy[i] - mx[i] * my[i];
      const double l1 = 2.0 * mx[i] * my[i] + kC1;
      const double l2 = mx[i] * mx[i] + my[i] * my[i] + kC1;
      const double s1 = 2.0 * cxy + kC2;
      const double s2 = vx + vy + kC2;
      const double s = (l1 * s1) / (l2 * s2);
      sum += s;
      if (want_grad) {
        // Partials with the second moments held fixed.
        d_mu[i] = s * (2.0 * my[i] / l1 - 2.0 * my[i] / s1 - 2.0 * mx[i] / l2 + 2.0 * mx[i] / s2);
        d_exx[i] = -s / s2;
        d_exy[i] = 2.0 * s / s1;
      }
    }
    result.value += sum * scale;
    if (!want_grad) continue;
    const auto g_mu = blur_adjoint(d_mu, w, h);
    const auto g_xx = blur_adjoint(d_exx, w, h);
    const auto g_xy = blur_adjoint(d_exy, w, h);
    for (std::size_t i = 0; i < n; ++i) {
      result.d_a.data()[i * ch + c] = scale * (g_mu[i] + 2.0 * x[i] * g_xx[i] + y[i] * g_xy[i]);
    }
  }
  return result;
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) { return compute(a, b, false).value; }

SsimGradient ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b) { return compute(a, b, true); }

}  // namespace confix
