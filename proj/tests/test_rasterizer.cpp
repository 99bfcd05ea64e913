#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <random>

#include "confix/error.hpp"
#include "confix/parallel.hpp"
#include "confix/rasterizer.hpp"
#include "support.hpp"

using namespace confix;

namespace {

Gaussian<double> isotropic(const Eigen::Vector3d& mean, double scale, double opacity, const Eigen::Vector3d& color) {
  Gaussian<double> g;
  g.mean = mean;
  g.log_scale = Eigen::Vector3d::Constant(std::log(scale));
  g.rotation = Eigen::Vector4d(1, 0, 0, 0);
  g.opacity_logit = logit(opacity);
  g.color = color;
  return g;
}

GaussianScene random_scene(std::mt19937_64& rng, int n) {
  GaussianScene s;
  for (int i = 0; i < n; ++i) s.gaussians.push_back(testing::random_gaussian(rng));
  return s;
}

/// Independent per-pixel compositing written from the textbook formula:
/// projection by hand, full sort per pixel, no CSR, no culling beyond the
/// same ellipse test.
ImageBuffer reference_render(const GaussianScene& scene, const Camera& cam, const Eigen::Vector3d& bg) {
  struct P {
    Eigen::Vector2d m;
    Eigen::Matrix2d inv;
    double z, o, r;
    Eigen::Vector3d c;
    int i;
  };
  std::vector<P> ps;
  for (int i = 0; i < static_cast<int>(scene.size()); ++i) {
    const auto& g = scene.gaussians[i];
    const Eigen::Vector3d p = cam.rotation.transpose() * (g.mean - cam.translation);
    if (p.z() <= 0.01) continue;
    const double fx = cam.fx(), fy = cam.fy();
    Eigen::Matrix<double, 2, 3> j;
    j << fx / p.z(), 0, -fx * p.x() / (p.z() * p.z()), 0, fy / p.z(), -fy * p.y() / (p.z() * p.z());
    const Eigen::Matrix3d rs = quaternion_to_matrix(g.rotation) * g.log_scale.array().exp().matrix().asDiagonal();
    const Eigen::Matrix2d cov =
        j * cam.rotation.transpose() * rs * rs.transpose() * cam.rotation * j.transpose() + 0.3 * Eigen::Matrix2d::Identity();
    const double mid = 0.5 * cov.trace();
    const double lmax = mid + std::sqrt(std::max(0.0, mid * mid - cov.determinant()));
    ps.push_back({Eigen::Vector2d(fx * p.x() / p.z() + cam.cx(), fy * p.y() / p.z() + cam.cy()), cov.inverse(), p.z(),
                  sigmoid(g.opacity_logit), 3.0 * std::sqrt(lmax), g.color, i});
  }
  std::stable_sort(ps.begin(), ps.end(), [](const P& a, const P& b) { return a.z < b.z; });
  ImageBuffer out(cam.width, cam.height, 3);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      double t = 1.0;
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      for (const P& p : ps) {
        const Eigen::Vector2d d(x - p.m.x(), y - p.m.y());
        if (std::abs(d.x()) > p.r || std::abs(d.y()) > p.r) continue;
        const double power = -0.5 * d.dot(p.inv * d);
        if (power < -4.5) continue;
        const double a = std::min(0.99, p.o * std::exp(power));
        c += t * a * p.c;
        t *= 1.0 - a;
        if (t < 1e-4) break;
      }
      out.set_rgb(x, y, c + t * bg);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("on-axis projection lands on the principal point") {
  Camera cam = testing::forward_camera(100, 100, 100.0);
  cam.intrinsics = make_intrinsics(100, 100, 50, 50);
  const auto g = isotropic(Eigen::Vector3d(0, 0, 1), 0.01, 0.5, Eigen::Vector3d::Ones());
  const Projection p = project_gaussian(g, cam);
  CHECK(p.mean2d.isApprox(Eigen::Vector2d(50, 50)));
  CHECK(p.depth_z == doctest::Approx(1.0));
  CHECK(p.visible);
  // Closed form for an on-axis isotropic Gaussian: (f s / z)^2 + 0.3.
  CHECK(p.cov2d(0, 0) == doctest::Approx(1.0 * 1.0 + 0.3));
  CHECK(p.cov2d(1, 1) == doctest::Approx(1.0 + 0.3));
  CHECK(std::abs(p.cov2d(0, 1)) < 1e-12);
}

TEST_CASE("Gaussians behind the camera or off-screen are invisible") {
  const Camera cam = testing::forward_camera(32, 32, 30.0);
  CHECK_FALSE(project_gaussian(isotropic(Eigen::Vector3d(0, 0, -1), 0.1, 0.5, Eigen::Vector3d::Ones()), cam).visible);
  CHECK_FALSE(project_gaussian(isotropic(Eigen::Vector3d(0, 0, 0.005), 0.1, 0.5, Eigen::Vector3d::Ones()), cam).visible);
  CHECK_FALSE(project_gaussian(isotropic(Eigen::Vector3d(50, 0, 2), 0.1, 0.5, Eigen::Vector3d::Ones()), cam).visible);
}

TEST_CASE("empty scene renders the background with zero alpha and depth") {
  const Camera cam = testing::forward_camera(8, 6, 10.0);
  const RenderOutput out = render(GaussianScene{}, cam, Eigen::Vector3d(0.2, 0.4, 0.6));
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) {
      CHECK(out.rgb.rgb(x, y) == Eigen::Vector3d(0.2, 0.4, 0.6));
      CHECK(out.alpha(x, y) == 0.0);
      CHECK(out.depth(x, y) == 0.0);
    }
  }
}

TEST_CASE("a near-opaque Gaussian centred on a pixel composites to its clamped opacity") {
  Camera cam = testing::forward_camera(21, 21, 20.0);
  const auto g = isotropic(Eigen::Vector3d(0, 0, 2), 0.5, 0.99, Eigen::Vector3d(1, 0, 0));
  GaussianScene s{{g}};
  const RenderOutput out = render(s, cam);
  CHECK(out.rgb(10, 10, 0) == doctest::Approx(0.99));
  CHECK(out.rgb(10, 10, 1) == 0.0);
  CHECK(out.alpha(10, 10) == doctest::Approx(0.99));
  CHECK(out.depth(10, 10) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("two stacked Gaussians blend front to back") {
  Camera cam = testing::forward_camera(21, 21, 20.0);
  GaussianScene s;
  // Listed back first: sorting, not list order, must decide.
  s.gaussians.push_back(isotropic(Eigen::Vector3d(0, 0, 2), 1.0, 0.5, Eigen::Vector3d(0, 1, 0)));
  s.gaussians.push_back(isotropic(Eigen::Vector3d(0, 0, 1), 0.5, 0.5, Eigen::Vector3d(1, 0, 0)));
  const RenderOutput out = render(s, cam);
  CHECK(out.rgb(10, 10, 0) == doctest::Approx(0.5));
  CHECK(out.rgb(10, 10, 1) == doctest::Approx(0.25));
  CHECK(out.alpha(10, 10) == doctest::Approx(0.75));
  CHECK(out.depth(10, 10) == doctest::Approx((0.5 * 1 + 0.25 * 2) / 0.75).epsilon(1e-6));
}

TEST_CASE("single Gaussian renders its camera-space depth and never exceeds its colour") {
  std::mt19937_64 rng(8);
  const Camera cam = testing::forward_camera(32, 32, 30.0);
  for (int k = 0; k < 10; ++k) {
    GaussianScene s{{testing::random_gaussian(rng)}};
    const RenderOutput out = render(s, cam);
    const double z = s.gaussians[0].mean.z();
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        CHECK(out.alpha(x, y) >= 0.0);
        CHECK(out.alpha(x, y) <= 1.0);
        for (int c = 0; c < 3; ++c) CHECK(out.rgb(x, y, c) <= s.gaussians[0].color[c] + 1e-15);
        if (out.alpha(x, y) >= 1e-6) CHECK(std::abs(out.depth(x, y) - z) < 1e-4);
      }
    }
  }
}

TEST_CASE("forward pass matches an independent per-pixel compositor") {
  std::mt19937_64 rng(21);
  const Camera cam = testing::forward_camera(32, 32, 28.0);
  for (int k = 0; k < 5; ++k) {
    const GaussianScene s = random_scene(rng, 12);
    const Eigen::Vector3d bg(0.1, 0.2, 0.3);
    const ImageBuffer ref = reference_render(s, cam, bg);
    const RenderOutput out = render(s, cam, bg);
    CHECK((out.rgb.flat() - ref.flat()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("alpha never decreases when one opacity rises") {
  std::mt19937_64 rng(4);
  const Camera cam = testing::forward_camera(24, 24, 22.0);
  GaussianScene s = random_scene(rng, 8);
  const RenderOutput before = render(s, cam);
  s.gaussians[3].opacity_logit += 0.7;
  const RenderOutput after = render(s, cam);
  CHECK(((after.alpha.flat() - before.alpha.flat()).array() >= -1e-15).all());
}

TEST_CASE("render is invariant to list order when depths are distinct") {
  std::mt19937_64 rng(12);
  const Camera cam = testing::forward_camera(24, 24, 22.0);
  GaussianScene s = random_scene(rng, 15);
  const RenderOutput a = render(s, cam);
  std::shuffle(s.gaussians.begin(), s.gaussians.end(), rng);
  const RenderOutput b = render(s, cam);
  CHECK(a.rgb == b.rgb);
  CHECK(a.alpha == b.alpha);
  CHECK(a.depth == b.depth);
}

TEST_CASE("degenerate footprints are skipped and counted") {
  Camera cam = testing::forward_camera(16, 16, 15.0);
  RasterConfig cfg;
  cfg.blur = 0.0;
  auto g = isotropic(Eigen::Vector3d(0, 0, 2), 1e-9, 0.5, Eigen::Vector3d::Ones());
  const RenderOutput out = render(GaussianScene{{g}}, cam, Eigen::Vector3d::Zero(), cfg);
  CHECK(out.diagnostics.skipped_degenerate == 1);
  CHECK(out.alpha.flat().maxCoeff() == 0.0);
}

TEST_CASE("analytic projection product agrees with forward-mode autodiff") {
  using Jet = Eigen::AutoDiffScalar<Eigen::Matrix<double, 10, 1>>;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int it = 0; it < 200; ++it) {
    Camera cam = testing::forward_camera(64, 48, 50.0, Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.3);
    cam.intrinsics(0, 1) = 2.0 * u(rng);  // skew exercises the general intrinsics path
    cam.rotation = Eigen::AngleAxisd(0.3 * u(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized()).toRotationMatrix();
    const Eigen::Vector3d mean = cam.rotation * Eigen::Vector3d(u(rng), u(rng), 3 + u(rng)) + cam.translation;
    const Eigen::Vector3d ls(u(rng) - 2, u(rng) - 2, u(rng) - 2);
    const Eigen::Vector4d q(u(rng) + 1.5, u(rng), u(rng), u(rng));
    const Eigen::Vector2d gm(u(rng), u(rng));
    const Eigen::Vector3d gc(u(rng), u(rng), u(rng));

    Vec3<Jet> jm, jl;
    Vec4<Jet> jq;
    for (int k = 0; k < 3; ++k) {
      jm[k] = Jet(mean[k], 10, k);
      jl[k] = Jet(ls[k], 10, 3 + k);
    }
    for (int k = 0; k < 4; ++k) jq[k] = Jet(q[k], 10, 6 + k);
    const Splat<Jet> s = project_splat(jm, jl, jq, cam, 0.3);
    Eigen::Matrix<double, 10, 1> expect = Eigen::Matrix<double, 10, 1>::Zero();
    for (int k = 0; k < 2; ++k) expect += gm[k] * s.mean2d[k].derivatives();
    for (int k = 0; k < 3; ++k) expect += gc[k] * s.conic[k].derivatives();

    const SplatInputGrad d = project_splat_vjp(mean, ls, q, cam, 0.3, gm, gc);
    Eigen::Matrix<double, 10, 1> got;
    got << d.mean, d.log_scale, d.rotation;
    CHECK((got - expect).norm() <= 1e-10 * std::max(1.0, expect.norm()));
  }
}

TEST_CASE("zero pixel gradient gives zero parameter gradients") {
  std::mt19937_64 rng(2);
  const Camera cam = testing::forward_camera(16, 16, 15.0);
  const GaussianScene s = random_scene(rng, 5);
  const RenderOutput out = render(s, cam);
  const GradientBundle g = render_backward(s, cam, out, ImageBuffer(16, 16, 3));
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(g.mean[i].isZero(0.0));
    CHECK(g.color[i].isZero(0.0));
    CHECK(g.opacity_logit[i] == 0.0);
    CHECK(g.pos2d[i].isZero(0.0));
  }
}

TEST_CASE("colour gradient of one Gaussian is the transmittance-weighted pixel gradient sum") {
  std::mt19937_64 rng(5);
  const Camera cam = testing::forward_camera(20, 20, 18.0);
  GaussianScene s{{isotropic(Eigen::Vector3d(0, 0, 2), 0.3, 0.6, Eigen::Vector3d(0.2, 0.5, 0.7))}};
  const RenderOutput out = render(s, cam);
  const ImageBuffer pg = testing::random_image(rng, 20, 20, 3, -1.0, 1.0);
  const GradientBundle g = render_backward(s, cam, out, pg);
  // With one Gaussian, T = 1 in front of it and its weight is the pixel alpha.
  Eigen::Vector3d expect = Eigen::Vector3d::Zero();
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) expect += pg.rgb(x, y) * out.alpha(x, y);
  }
  CHECK((g.color[0] - expect).norm() < 1e-12);
}

TEST_CASE("backward pass matches central differences of a linear pixel loss") {
  std::mt19937_64 rng(77);
  const Camera cam = testing::forward_camera(32, 32, 30.0);
  RasterConfig cfg;
  cfg.cull_sigmas = 6.0;  // keeps the footprint cutoff out of the difference stencil
  for (int trial = 0; trial < 3; ++trial) {
    GaussianScene s = random_scene(rng, 6);
    const ImageBuffer pg = testing::random_image(rng, 32, 32, 3, -1.0, 1.0);
    const Eigen::Vector3d bg(0.3, 0.1, 0.6);
    auto loss = [&](const GaussianScene& sc) { return pg.flat().dot(render(sc, cam, bg, cfg).rgb.flat()); };
    const RenderOutput out = render(s, cam, bg, cfg);
    const GradientBundle g = render_backward(s, cam, out, pg, cfg);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto probe = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + h;
        const double up = loss(s);
        param = keep - h;
        const double down = loss(s);
        param = keep;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-4}));
      };
      auto& gs = s.gaussians[i];
      for (int k = 0; k < 3; ++k) probe(gs.mean[k], g.mean[i][k]);
      for (int k = 0; k < 3; ++k) probe(gs.log_scale[k], g.log_scale[i][k]);
      for (int k = 0; k < 3; ++k) probe(gs.color[k], g.color[i][k]);
      probe(gs.opacity_logit, g.opacity_logit[i]);
      // Rotation: the gradient lives in the tangent space of the unit sphere.
      for (int k = 0; k < 4; ++k) probe(gs.rotation[k], g.rotation[i][k]);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("backward rejects a blend state from another scene") {
  std::mt19937_64 rng(1);
  const Camera cam = testing::forward_camera(16, 16, 15.0);
  GaussianScene s = random_scene(rng, 4);
  const RenderOutput out = render(s, cam);
  s.gaussians[1].color[0] += 0.1;
  CHECK_THROWS_AS(render_backward(s, cam, out, ImageBuffer(16, 16, 3)), ContractError);
  GaussianScene fewer = s;
  fewer.gaussians.pop_back();
  CHECK_THROWS_AS(render_backward(fewer, cam, out, ImageBuffer(16, 16, 3)), ContractError);
  CHECK_THROWS_AS(render_backward(s, cam, render(s, cam), ImageBuffer(8, 16, 3)), ContractError);
}

TEST_CASE("forward and backward are bit-identical for any worker count") {
  std::mt19937_64 rng(31);
  const Camera cam = testing::forward_camera(40, 30, 35.0);
  const GaussianScene s = random_scene(rng, 40);
  const ImageBuffer pg = testing::random_image(rng, 40, 30, 3, -1.0, 1.0);
  set_worker_count(1);
  const RenderOutput a = render(s, cam);
  const GradientBundle ga = render_backward(s, cam, a, pg);
  for (int workers : {2, 4}) {
    set_worker_count(workers);
    const RenderOutput b = render(s, cam);
    const GradientBundle gb = render_backward(s, cam, b, pg);
    CHECK(a.rgb == b.rgb);
    CHECK(a.depth == b.depth);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(ga.mean[i] == gb.mean[i]);
      CHECK(ga.rotation[i] == gb.rotation[i]);
      CHECK(ga.color[i] == gb.color[i]);
      CHECK(ga.opacity_logit[i] == gb.opacity_logit[i]);
    }
  }
  set_worker_count(0);
}
