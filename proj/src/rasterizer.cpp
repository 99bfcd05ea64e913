#include "confix/rasterizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "confix/error.hpp"
#include "confix/parallel.hpp"

namespace confix {

namespace {

constexpr double kDepthEpsilon = 1e-8;
constexpr double kCoverageFloor = 1e-6;

double footprint_radius(const Eigen::Matrix2d& cov, double det, double sigmas) {
  const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  return sigmas * std::sqrt(lambda_max);
}

struct PixelRange {
  int x0, x1, y0, y1;  // inclusive
  bool empty() const { return x0 > x1 || y0 > y1; }
};

PixelRange pixel_range(const Eigen::Vector2d& m, double r, int w, int h) {
  return {std::max(0, static_cast<int>(std::ceil(m[0] - r))),
          std::min(w - 1, static_cast<int>(std::floor(m[0] + r))),
          std::max(0, static_cast<int>(std::ceil(m[1] - r))),
          std::min(h - 1, static_cast<int>(std::floor(m[1] + r)))};
}

inline double falloff_power(const Eigen::Vector3d& conic, double dx, double dy) {
  return -0.5 * (conic[0] * dx * dx + conic[2] * dy * dy) - conic[1] * dx * dy;
}

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
}

// FNV-1a over 64-bit words rather than bytes.
inline void hash_word(std::uint64_t& h, double v) {
  h ^= std::bit_cast<std::uint64_t>(v);
  h *= 1099511628211ull;
}

template <typename Derived>
void hash_dense(std::uint64_t& h, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) hash_word(h, m(i));
}

// Per-pixel contribution to one Gaussian's screen-space gradients.
struct GradEntry {
  std::uint32_t index;
  double mean2d[2];
  double conic[3];
  double opacity;
  double color[3];
};

}  // namespace

SplatInputGrad project_splat_vjp(const Eigen::Vector3d& mean, const Eigen::Vector3d& log_scale,
                                 const Eigen::Vector4d& rotation, const Camera& cam, double blur,
                                 const Eigen::Vector2d& d_mean2d, const Eigen::Vector3d& d_conic) {
  const Eigen::Matrix3d& k = cam.intrinsics;
  const Eigen::Matrix3d w2c = cam.rotation.transpose();
  const Eigen::Vector3d p = w2c * (mean - cam.translation);
  const Eigen::Vector3d h = k * p;
  const double inv_z = 1.0 / h[2];
  const Eigen::Vector2d u(h[0] * inv_z, h[1] * inv_z);
  Eigen::Matrix<double, 2, 3> jac;
  jac.row(0) = (k.row(0) - u[0] * k.row(2)) * inv_z;
  jac.row(1) = (k.row(1) - u[1] * k.row(2)) * inv_z;

  const double qn = rotation.norm();
  const Eigen::Vector4d q = rotation / qn;
  const Eigen::Matrix3d rq = quaternion_to_matrix(q);
  const Eigen::Vector3d scale = log_scale.array().exp();
  const Eigen::Matrix3d m = rq * scale.asDiagonal();
  const Eigen::Matrix3d sigma = m * m.transpose();
  const Eigen::Matrix<double, 2, 3> t = jac * w2c;
  Eigen::Matrix2d cov = t * sigma * t.transpose();
  cov(0, 0) += blur;
  cov(1, 1) += blur;
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  Eigen::Matrix2d inv;
  inv << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;

  // The conic reads inv(0,0), inv(0,1), inv(1,1); split the off-diagonal
  // weight so the covariance gradient stays symmetric.
  Eigen::Matrix2d g_inv;
  g_inv << d_conic[0], 0.5 * d_conic[1], 0.5 * d_conic[1], d_conic[2];
  const Eigen::Matrix2d g_cov = -inv.transpose() * g_inv * inv.transpose();

  const Eigen::Matrix<double, 2, 3> g_t = 2.0 * g_cov * t * sigma;
  const Eigen::Matrix3d g_sigma = t.transpose() * g_cov * t;
  const Eigen::Matrix3d g_m = 2.0 * g_sigma * m;

  SplatInputGrad out;
  const Eigen::Matrix3d rtg = rq.transpose() * g_m;
  for (int i = 0; i < 3; ++i) out.log_scale[i] = rtg(i, i) * scale[i];

  const Eigen::Matrix3d g = g_m * scale.asDiagonal();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Vector4d g_q;
  g_q[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  g_q[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                  w * g(2, 1) - 2.0 * x * g(2, 2));
  g_q[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                  z * g(2, 1) - 2.0 * y * g(2, 2));
  g_q[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1) +
                  y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  out.rotation = (g_q - q * q.dot(g_q)) / qn;

  // Back through T = J W and the perspective divide.
  const Eigen::Matrix<double, 2, 3> g_jac = g_t * w2c.transpose();
  Eigen::Vector2d g_u = d_mean2d;
  for (int i = 0; i < 2; ++i) g_u[i] -= g_jac.row(i).dot(k.row(2)) * inv_z;
  Eigen::Vector3d g_h;
  g_h[0] = g_u[0] * inv_z;
  g_h[1] = g_u[1] * inv_z;
  g_h[2] = -(g_u[0] * u[0] + g_u[1] * u[1]) * inv_z - g_jac.cwiseProduct(jac).sum() * inv_z;
  out.mean = w2c.transpose() * (k.transpose() * g_h);
  return out;
}

std::uint64_t fingerprint(const GaussianScene& scene, const Camera& cam) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& g : scene.gaussians) {
    hash_dense(h, g.mean);
    hash_dense(h, g.log_scale);
    hash_dense(h, g.rotation);
    hash_word(h, g.opacity_logit);
    hash_dense(h, g.color);
  }
  hash_dense(h, cam.intrinsics);
  hash_dense(h, cam.rotation);
  hash_dense(h, cam.translation);
  const int dims[2] = {cam.width, cam.height};
  hash_bytes(h, dims, sizeof dims);
  return h;
}

Projection project_gaussian(const Gaussian<double>& g, const Camera& cam, const RasterConfig& cfg) {
  const Splat<double> s = project_splat(g.mean, g.log_scale, g.rotation, cam, cfg.blur);
  Projection p;
  p.mean2d = s.mean2d;
  p.cov2d = s.cov2d;
  p.depth_z = s.depth;
  if (!(s.depth > cfg.near_plane) || !(s.determinant >= cfg.min_determinant)) return p;
  const double r = footprint_radius(s.cov2d, s.determinant, cfg.cull_sigmas);
  p.visible = !pixel_range(s.mean2d, r, cam.width, cam.height).empty();
  return p;
}

void GradientBundle::resize(std::size_t n) {
  mean.resize(n);
  log_scale.resize(n);
  rotation.resize(n);
  opacity_logit.resize(n);
  color.resize(n);
  pos2d.resize(n);
  touched.resize(n);
  set_zero();
}

void GradientBundle::set_zero() {
  std::fill(mean.begin(), mean.end(), Eigen::Vector3d::Zero());
  std::fill(log_scale.begin(), log_scale.end(), Eigen::Vector3d::Zero());
  std::fill(rotation.begin(), rotation.end(), Eigen::Vector4d::Zero());
  std::fill(opacity_logit.begin(), opacity_logit.end(), 0.0);
  std::fill(color.begin(), color.end(), Eigen::Vector3d::Zero());
  std::fill(pos2d.begin(), pos2d.end(), Eigen::Vector2d::Zero());
  std::fill(touched.begin(), touched.end(), std::uint8_t{0});
}

void GradientBundle::accumulate(const GradientBundle& o) {
  if (o.size() != size()) throw ContractError("GradientBundle::accumulate: size mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    mean[i] += o.mean[i];
    log_scale[i] += o.log_scale[i];
    rotation[i] += o.rotation[i];
    opacity_logit[i] += o.opacity_logit[i];
    color[i] += o.color[i];
    pos2d[i] += o.pos2d[i];
    touched[i] |= o.touched[i];
  }
}

bool GradientBundle::all_finite() const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!mean[i].allFinite() || !log_scale[i].allFinite() || !rotation[i].allFinite() ||
        !std::isfinite(opacity_logit[i]) || !color[i].allFinite() || !pos2d[i].allFinite()) {
      return false;
    }
  }
  return true;
}

RenderOutput render(const GaussianScene& scene, const Camera& cam, const Eigen::Vector3d& background,
                    const RasterConfig& cfg) {
  const int w = cam.width;
  const int h = cam.height;
  const std::size_t n = scene.size();
  RenderOutput out;
  out.rgb = ImageBuffer(w, h, 3);
  out.alpha = ImageBuffer(w, h, 1);
  out.depth = ImageBuffer(w, h, 1);
  BlendState& bs = out.blend_state;
  bs.fingerprint = fingerprint(scene, cam);
  bs.gaussian_count = n;
  bs.width = w;
  bs.height = h;
  bs.background = background;
  bs.splats.resize(n);

  std::vector<PixelRange> ranges(n);
  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = scene.gaussians[i];
    const Splat<double> s = project_splat(g.mean, g.log_scale, g.rotation, cam, cfg.blur);
    SplatRecord& rec = bs.splats[i];
    rec.mean2d = s.mean2d;
    rec.depth = s.depth;
    rec.opacity = sigmoid(g.opacity_logit);
    if (!(s.depth > cfg.near_plane)) continue;
    if (!(s.determinant >= cfg.min_determinant)) {
      ++out.diagnostics.skipped_degenerate;
      continue;
    }
    rec.conic = s.conic;
    rec.radius = footprint_radius(s.cov2d, s.determinant, cfg.cull_sigmas);
    ranges[i] = pixel_range(s.mean2d, rec.radius, w, h);
    if (ranges[i].empty()) continue;
    rec.visible = true;
    order.push_back(static_cast<std::uint32_t>(i));
  }
  out.diagnostics.visible = order.size();
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const double da = bs.splats[a].depth, db = bs.splats[b].depth;
    return da < db || (da == db && a < b);
  });

  // Bucket Gaussians per pixel in depth order (CSR).
  const std::size_t pixels = static_cast<std::size_t>(w) * h;
  bs.offsets.assign(pixels + 1, 0);
  for (std::uint32_t i : order) {
    const PixelRange& r = ranges[i];
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) ++bs.offsets[static_cast<std::size_t>(y) * w + x + 1];
    }
  }
  std::partial_sum(bs.offsets.begin(), bs.offsets.end(), bs.offsets.begin());
  bs.indices.resize(bs.offsets.back());
  {
    std::vector<std::uint32_t> cursor(bs.offsets.begin(), bs.offsets.end() - 1);
    for (std::uint32_t i : order) {
      const PixelRange& r = ranges[i];
      for (int y = r.y0; y <= r.y1; ++y) {
        for (int x = r.x0; x <= r.x1; ++x) bs.indices[cursor[static_cast<std::size_t>(y) * w + x]++] = i;
      }
    }
  }
  bs.composited.assign(pixels, 0);
  bs.final_transmittance.assign(pixels, 1.0);
  bs.falloff.assign(bs.indices.size(), 0.0);

  const double cutoff = -0.5 * cfg.cull_sigmas * cfg.cull_sigmas;
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * w + x;
      double t = 1.0;
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      double depth_acc = 0.0;
      double weight_acc = 0.0;
      std::uint32_t used = 0;
      const std::uint32_t begin = bs.offsets[pix], end = bs.offsets[pix + 1];
      for (std::uint32_t k = begin; k < end; ++k) {
        ++used;
        const std::uint32_t gi = bs.indices[k];
        const SplatRecord& s = bs.splats[gi];
        const double power = falloff_power(s.conic, x - s.mean2d[0], y - s.mean2d[1]);
        if (power < cutoff) continue;
        const double f = std::exp(power);
        bs.falloff[k] = f;
        const double a = std::min(cfg.alpha_max, s.opacity * f);
        const double wgt = a * t;
        c += wgt * scene.gaussians[gi].color;
        depth_acc += wgt * s.depth;
        weight_acc += wgt;
        t *= 1.0 - a;
        if (t < cfg.min_transmittance) break;
      }
      bs.composited[pix] = used;
      bs.final_transmittance[pix] = t;
      out.rgb.set_rgb(x, y, c + t * background);
      const double cov = 1.0 - t;
      out.alpha(x, y) = cov;
      out.depth(x, y) = cov < kCoverageFloor ? 0.0 : depth_acc / (weight_acc + kDepthEpsilon);
    }
  });
  return out;
}

GradientBundle render_backward(const GaussianScene& scene, const Camera& cam, const RenderOutput& out,
                               const ImageBuffer& pixel_grad, const RasterConfig& cfg) {
  const BlendState& bs = out.blend_state;
  if (bs.gaussian_count != scene.size() || bs.width != cam.width || bs.height != cam.height ||
      bs.fingerprint != fingerprint(scene, cam)) {
    throw ContractError("render_backward: blend state does not match scene/camera");
  }
  if (pixel_grad.width() != cam.width || pixel_grad.height() != cam.height || pixel_grad.channels() != 3) {
    throw ContractError("render_backward: pixel gradient must be a 3-channel image of the render size");
  }
  const int w = cam.width;
  const int h = cam.height;

  const std::size_t n = scene.size();
  std::vector<Eigen::Vector2d> d_mean2d(n, Eigen::Vector2d::Zero());
  std::vector<Eigen::Vector3d> d_conic(n, Eigen::Vector3d::Zero());
  std::vector<double> d_opacity(n, 0.0);
  GradientBundle grads(n);
  auto apply = [&](const GradEntry& e) {
    d_mean2d[e.index] += Eigen::Vector2d(e.mean2d[0], e.mean2d[1]);
    d_conic[e.index] += Eigen::Vector3d(e.conic[0], e.conic[1], e.conic[2]);
    d_opacity[e.index] += e.opacity;
    grads.color[e.index] += Eigen::Vector3d(e.color[0], e.color[1], e.color[2]);
  };

  // Contributions are summed in row, pixel, back-to-front order. With one
  // worker they are applied as they are produced; otherwise each row buffers
  // its entries and the rows are reduced in order afterwards. Both paths add
  // the same terms in the same order, so results match bit for bit.
  const bool serial = worker_count() <= 1;
  std::vector<std::vector<GradEntry>> rows(serial ? 0 : h);
  auto replay_row = [&](int y, const auto& emit) {
    std::vector<double> trans;
    for (int x = 0; x < w; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * w + x;
      const Eigen::Vector3d dl_dc = pixel_grad.rgb(x, y);
      if (dl_dc.isZero(0.0)) continue;
      const std::uint32_t begin = bs.offsets[pix];
      const std::uint32_t used = bs.composited[pix];
      trans.resize(used);
      double t = 1.0;
      for (std::uint32_t k = 0; k < used; ++k) {
        trans[k] = t;
        const double f = bs.falloff[begin + k];
        if (f == 0.0) continue;
        t *= 1.0 - std::min(cfg.alpha_max, bs.splats[bs.indices[begin + k]].opacity * f);
      }
      Eigen::Vector3d behind = bs.final_transmittance[pix] * bs.background;
      for (std::uint32_t kk = used; kk-- > 0;) {
        const double f = bs.falloff[begin + kk];
        if (f == 0.0) continue;
        const std::uint32_t gi = bs.indices[begin + kk];
        const SplatRecord& s = bs.splats[gi];
        const Eigen::Vector3d& color = scene.gaussians[gi].color;
        const double raw = s.opacity * f;
        const double a = std::min(cfg.alpha_max, raw);
        const double tk = trans[kk];
        GradEntry e{};
        e.index = gi;
        for (int c = 0; c < 3; ++c) e.color[c] = dl_dc[c] * a * tk;
        const double dl_da = dl_dc.dot(color * tk - behind / (1.0 - a));
        behind += color * (a * tk);
        if (raw < cfg.alpha_max) {
          const double dx = x - s.mean2d[0];
          const double dy = y - s.mean2d[1];
          e.opacity = dl_da * f;
          const double dl_dpower = dl_da * raw;
          e.mean2d[0] = dl_dpower * (s.conic[0] * dx + s.conic[1] * dy);
          e.mean2d[1] = dl_dpower * (s.conic[1] * dx + s.conic[2] * dy);
          e.conic[0] = -0.5 * dl_dpower * dx * dx;
          e.conic[1] = -dl_dpower * dx * dy;
          e.conic[2] = -0.5 * dl_dpower * dy * dy;
        }
        emit(e);
      }
    }
  };
  if (serial) {
    for (int y = 0; y < h; ++y) replay_row(y, apply);
  } else {
    parallel_for(h, [&](int y) {
      std::vector<GradEntry>& sink = rows[y];
      sink.reserve(bs.offsets[static_cast<std::size_t>(y + 1) * w] - bs.offsets[static_cast<std::size_t>(y) * w]);
      replay_row(y, [&](const GradEntry& e) { sink.push_back(e); });
    });
    for (const auto& row : rows) {
      for (const GradEntry& e : row) apply(e);
    }
  }
  for (std::size_t i = 0; i < n; ++i) grads.touched[i] = bs.splats[i].visible ? 1 : 0;

  // Chain screen-space gradients through the projection.
  parallel_for(static_cast<int>(n), [&](int i) {
    if (!grads.touched[i]) return;
    const auto& g = scene.gaussians[i];
    const SplatInputGrad d =
        project_splat_vjp(g.mean, g.log_scale, g.rotation, cam, cfg.blur, d_mean2d[i], d_conic[i]);
    grads.mean[i] = d.mean;
    grads.log_scale[i] = d.log_scale;
    grads.rotation[i] = d.rotation;
    const double o = bs.splats[i].opacity;
    grads.opacity_logit[i] = d_opacity[i] * o * (1.0 - o);
    grads.pos2d[i] = d_mean2d[i];
  });
  return grads;
}

}  // namespace confix
