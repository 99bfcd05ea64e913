#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "confix/error.hpp"
#include "confix/objective.hpp"
#include "confix/ssim.hpp"
#include "support.hpp"

using namespace confix;

namespace {

/// Direct 2D windowed SSIM: every pixel sums its clipped 11x11 window.
double brute_ssim(const ImageBuffer& a, const ImageBuffer& b) {
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < a.width(); ++x) {
        double wsum = 0, ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -5; dy <= 5; ++dy) {
          for (int dx = -5; dx <= 5; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= a.width() || yy >= a.height()) continue;
            const double w = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
            const double va = a(xx, yy, c), vb = b(xx, yy, c);
            wsum += w;
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        ma /= wsum;
        mb /= wsum;
        const double va = saa / wsum - ma * ma, vb = sbb / wsum - mb * mb, cov = sab / wsum - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    }
  }
  return total / static_cast<double>(a.size());
}

template <typename F>
void check_gradient(const ImageBuffer& render, const ImageBuffer& analytic, F loss, double tol) {
  ImageBuffer probe = render;
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < probe.size(); i += 7) {
    const double keep = probe.data()[i];
    probe.data()[i] = keep + h;
    const double up = loss(probe);
    probe.data()[i] = keep - h;
    const double down = loss(probe);
    probe.data()[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic.data()[i]));
  }
  CHECK(worst < tol);
}

}  // namespace

TEST_CASE("weighted L1 basics") {
  std::mt19937_64 rng(1);
  // The eps in the denominator shifts the unit-weight loss by loss * eps / N,
  // below 1e-12 once N exceeds about 1e4 pixels.
  const ImageBuffer a = testing::random_image(rng, 160, 120, 3), b = testing::random_image(rng, 160, 120, 3);
  double plain = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) plain += std::abs(a.data()[i] - b.data()[i]);
  plain /= static_cast<double>(a.pixel_count());
  CHECK(std::abs(weighted_l1(a, b, ImageBuffer(160, 120, 1, 1.0)).loss - plain) < 1e-12);

  const LossTerm zero = weighted_l1(a, b, ImageBuffer(160, 120, 1, 0.0));
  CHECK(zero.loss == 0.0);
  CHECK(zero.grad.flat().isZero(0.0));

  // Two pixels with per-pixel L1 of 0.3 and 0.1, weights 1 and 0.
  ImageBuffer r(2, 1, 3), t(2, 1, 3), w(2, 1, 1);
  r.set_rgb(0, 0, Eigen::Vector3d(0.1, 0.1, 0.1));
  r.set_rgb(1, 0, Eigen::Vector3d(0.1, 0.0, 0.0));
  w(0, 0) = 1.0;
  CHECK(weighted_l1(r, t, w).loss == doctest::Approx(0.3 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("weighted L1 does not change when every weight is scaled") {
  std::mt19937_64 rng(2);
  const ImageBuffer a = testing::random_image(rng, 12, 10, 3), b = testing::random_image(rng, 12, 10, 3);
  const ImageBuffer w = testing::random_image(rng, 12, 10, 1, 0.2, 1.0);
  ImageBuffer w3 = w;
  w3.flat() *= 3.7;
  CHECK(std::abs(weighted_l1(a, b, w).loss - weighted_l1(a, b, w3).loss) < 1e-9);
}

TEST_CASE("ssim matches a brute-force windowed evaluation") {
  std::mt19937_64 rng(3);
  for (auto [w, h] : {std::pair{20, 16}, std::pair{7, 5}, std::pair{1, 1}}) {
    const ImageBuffer a = testing::random_image(rng, w, h, 3);
    ImageBuffer b = a;
    for (double& v : b.data()) v = std::clamp(v + 0.2 * (std::uniform_real_distribution<double>(-1, 1)(rng)), 0.0, 1.0);
    CHECK(std::abs(ssim(a, b) - brute_ssim(a, b)) < 1e-12);
  }
}

TEST_CASE("ssim of constant images is the luminance term") {
  const ImageBuffer a(16, 16, 3, 0.9), b(16, 16, 3, 0.1);
  const double c1 = 1e-4;
  CHECK(ssim(a, b) == doctest::Approx((2 * 0.9 * 0.1 + c1) / (0.81 + 0.01 + c1)).epsilon(1e-12));
  const ImageBuffer c(16, 16, 3, 0.6);
  const LossTerm l = weighted_ssim(c, b, ImageBuffer(16, 16, 1, 1.0));
  CHECK(l.loss == doctest::Approx(1.0 - (2 * 0.6 * 0.1 + c1) / (0.36 + 0.01 + c1)).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)));
}

TEST_CASE("weighted SSIM edge cases") {
  std::mt19937_64 rng(4);
  const ImageBuffer a = testing::random_image(rng, 14, 12, 3), b = testing::random_image(rng, 14, 12, 3);
  const LossTerm gated = weighted_ssim(a, b, ImageBuffer(14, 12, 1, 0.0));
  CHECK(std::abs(gated.loss) < 1e-12);
  CHECK(gated.grad.flat().isZero(0.0));
  CHECK(std::abs(weighted_ssim(b, b, testing::random_image(rng, 14, 12, 1)).loss) < 1e-12);
  CHECK(weighted_ssim(a, b, ImageBuffer(14, 12, 1, 1.0)).loss == doctest::Approx(1.0 - ssim(a, b)));
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(5);
  const ImageBuffer a = testing::random_image(rng, 15, 13, 3), b = testing::random_image(rng, 15, 13, 3);
  const ImageBuffer w = testing::random_image(rng, 15, 13, 1);
  check_gradient(a, weighted_l1(a, b, w).grad, [&](const ImageBuffer& r) { return weighted_l1(r, b, w).loss; }, 1e-7);
  check_gradient(a, weighted_ssim(a, b, w).grad, [&](const ImageBuffer& r) { return weighted_ssim(r, b, w).loss; },
                 1e-8);
  check_gradient(a, target_loss(a, b, w, 0.2).grad,
                 [&](const ImageBuffer& r) { return target_loss(r, b, w, 0.2).total; }, 1e-7);
}

TEST_CASE("zero-weight pixels receive exactly zero gradient") {
  std::mt19937_64 rng(6);
  const ImageBuffer a = testing::random_image(rng, 20, 20, 3), b = testing::random_image(rng, 20, 20, 3);
  ImageBuffer w = testing::random_image(rng, 20, 20, 1);
  for (int y = 5; y < 12; ++y) {
    for (int x = 3; x < 17; ++x) w(x, y) = 0.0;
  }
  const TargetLoss t = target_loss(a, b, w, 0.2);
  for (int y = 5; y < 12; ++y) {
    for (int x = 3; x < 17; ++x) CHECK(t.grad.rgb(x, y) == Eigen::Vector3d::Zero());
  }
}

TEST_CASE("target loss mixes the two terms linearly") {
  std::mt19937_64 rng(7);
  const ImageBuffer a = testing::random_image(rng, 10, 10, 3), b = testing::random_image(rng, 10, 10, 3);
  const ImageBuffer w = testing::random_image(rng, 10, 10, 1);
  const double l1 = weighted_l1(a, b, w).loss, ss = weighted_ssim(a, b, w).loss;
  CHECK(target_loss(a, b, w, 0.0).total == doctest::Approx(l1));
  CHECK(target_loss(a, b, w, 1.0).total == doctest::Approx(ss));
  const TargetLoss t = target_loss(a, b, w, 0.2);
  CHECK(t.total == doctest::Approx(0.8 * l1 + 0.2 * ss));
  CHECK_THROWS_AS(target_loss(a, b, w, 1.5), ValidationError);
  CHECK_THROWS_AS(weighted_l1(a, ImageBuffer(10, 9, 3), w), ContractError);
}

TEST_CASE("anchor loss is the unit-weight target loss and only for supports") {
  std::mt19937_64 rng(8);
  const ImageBuffer a = testing::random_image(rng, 10, 10, 3), gt = testing::random_image(rng, 10, 10, 3);
  const Camera sup = testing::forward_camera(10, 10, 10.0, Eigen::Vector3d::Zero(), 0, true);
  const Camera nov = testing::forward_camera(10, 10, 10.0, Eigen::Vector3d::Zero(), 1, false);
  const TargetLoss anchor = gt_anchor_loss(a, gt, sup, 0.2);
  const TargetLoss ref = target_loss(a, gt, ImageBuffer(10, 10, 1, 1.0), 0.2);
  CHECK(anchor.total == ref.total);
  CHECK(anchor.grad == ref.grad);
  CHECK(gt_anchor_loss(gt, gt, sup, 0.2).total == doctest::Approx(0.0));
  CHECK_THROWS_AS(gt_anchor_loss(a, gt, nov, 0.2), ContractError);
}

TEST_CASE("batch objective composition") {
  std::mt19937_64 rng(9);
  const RepairConfig cfg;
  const Camera sup = testing::forward_camera(10, 10, 10.0, Eigen::Vector3d::Zero(), 0, true);
  const Camera nov = testing::forward_camera(10, 10, 10.0, Eigen::Vector3d::Zero(), 1, false);
  const ImageBuffer rn = testing::random_image(rng, 10, 10, 3), tn = testing::random_image(rng, 10, 10, 3);
  const ImageBuffer rs = testing::random_image(rng, 10, 10, 3), ts = testing::random_image(rng, 10, 10, 3);
  const ImageBuffer wn = testing::random_image(rng, 10, 10, 1), ones(10, 10, 1, 1.0);
  const double ln = target_loss(rn, tn, wn, cfg.lambda_ssim).total;
  const double ls = target_loss(rs, ts, ones, cfg.lambda_ssim).total;

  CHECK(batch_loss({{&nov, &rn, &tn, &wn}}, cfg).total == doctest::Approx(ln));
  const LossReport s = batch_loss({{&sup, &rs, &ts, &ones}}, cfg);
  CHECK(s.total == doctest::Approx((1.0 + cfg.lambda_gt) * ls));
  const LossReport both = batch_loss({{&nov, &rn, &tn, &wn}, {&sup, &rs, &ts, &ones}}, cfg);
  CHECK(both.total == doctest::Approx(0.5 * (ln + ls) + cfg.lambda_gt * ls));
  CHECK(both.gt_loss == doctest::Approx(ls));
  CHECK(both.per_pixel_grad.size() == 2);

  RepairConfig half = cfg;
  half.lambda_gt = 0.5;
  CHECK(batch_loss({{&sup, &rs, &ts, &ones}}, half).total == doctest::Approx(1.5 * ls));
  CHECK_THROWS_AS(batch_loss({}, cfg), ContractError);
}
