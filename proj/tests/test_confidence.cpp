#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "confix/confidence.hpp"
#include "confix/error.hpp"
#include "support.hpp"

using namespace confix;

namespace {

/// Plain double loop over the clipped window.
ImageBuffer brute_box(const ImageBuffer& raw, int k) {
  const int r = k / 2;
  ImageBuffer out(raw.width(), raw.height(), 1);
  for (int y = 0; y < raw.height(); ++y) {
    for (int x = 0; x < raw.width(); ++x) {
      double s = 0.0;
      int n = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= raw.width() || yy >= raw.height()) continue;
          s += raw(xx, yy);
          ++n;
        }
      }
      out(x, y) = s / n;
    }
  }
  return out;
}

constexpr double kPlaneZ = 3.0;

Eigen::Vector3d texture(double wx, double wy) {
  return Eigen::Vector3d(0.5 + 0.2 * std::sin(2.0 * wx), 0.5 + 0.2 * std::cos(1.5 * wy),
                         0.4 + 0.1 * std::sin(wx + wy));
}

/// Exact image of the textured plane z = kPlaneZ seen by a forward camera.
ImageBuffer plane_image(const Camera& cam) {
  ImageBuffer img(cam.width, cam.height, 3);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double d = kPlaneZ - cam.translation.z();
      const Eigen::Vector3d w = unproject_pixel(Eigen::Vector2d(x, y), d, cam);
      img.set_rgb(x, y, texture(w.x(), w.y()));
    }
  }
  return img;
}

struct PlaneRig {
  Camera pseudo = testing::forward_camera(64, 64, 60.0, Eigen::Vector3d(0.15, 0.0, 0.0), 1);
  Camera support = testing::forward_camera(64, 64, 60.0, Eigen::Vector3d::Zero(), 0, true);
  ImageBuffer support_img = plane_image(support);
  ImageBuffer alpha = ImageBuffer(64, 64, 1, 1.0);
  ImageBuffer depth = ImageBuffer(64, 64, 1, kPlaneZ);
};

}  // namespace

TEST_CASE("raw confidence branches") {
  const RepairConfig cfg;
  CHECK(raw_confidence(0.0, 2, 0.5, cfg) == 1.0);
  CHECK(raw_confidence(0.1, 1, 0.3, cfg) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(raw_confidence(0.5, 0, 0.9, cfg) == 0.3);
  CHECK(raw_confidence(0.0, 3, 0.1, cfg) == 0.0);
  CHECK(raw_confidence(0.0, 0, 0.1, cfg) == 0.0);

  double prev = 2.0;
  for (double e = 0.0; e <= 1.0; e += 0.01) {
    const double c = raw_confidence(e, 1, 0.8, cfg);
    CHECK(c <= prev);
    CHECK(c >= 0.0);
    prev = c;
  }
}

TEST_CASE("raising alpha_min never raises a raw score") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RepairConfig lo, hi;
  hi.alpha_min = 0.6;
  for (int i = 0; i < 500; ++i) {
    const double e = u(rng), a = u(rng);
    const int n = static_cast<int>(u(rng) * 3);
    CHECK(raw_confidence(e, n, a, hi) <= raw_confidence(e, n, a, lo));
  }
}

TEST_CASE("box smoothing against a brute-force window sum") {
  std::mt19937_64 rng(9);
  const ImageBuffer raw = testing::random_image(rng, 23, 17, 1);
  for (int k : {1, 3, 7, 15, 41}) {
    const ImageBuffer s = smooth_confidence(raw, k);
    CHECK((s.flat() - brute_box(raw, k).flat()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.flat().minCoeff() >= raw.flat().minCoeff() - 1e-14);
    CHECK(s.flat().maxCoeff() <= raw.flat().maxCoeff() + 1e-14);
  }
  CHECK(smooth_confidence(raw, 1) == raw);
}

TEST_CASE("box smoothing fixes constants and spreads an impulse evenly") {
  const ImageBuffer c(30, 30, 1, 0.37);
  CHECK((smooth_confidence(c, 15).flat().array() - 0.37).abs().maxCoeff() < 1e-14);
  ImageBuffer impulse(31, 31, 1);
  impulse(15, 15) = 1.0;
  const ImageBuffer s = smooth_confidence(impulse, 15);
  CHECK(s(15, 15) == doctest::Approx(1.0 / 225.0));
  CHECK(s(8, 8) == doctest::Approx(1.0 / 225.0));
  CHECK(s(7, 15) == 0.0);
  CHECK_THROWS_AS(smooth_confidence(c, 4), ValidationError);
  CHECK_THROWS_AS(smooth_confidence(c, 0), ValidationError);
}

TEST_CASE("support maps are all ones") {
  const ConfidenceMap m = support_confidence(7, 3, 4);
  CHECK(m.view_id == 4);
  CHECK(m.weights.flat().minCoeff() == 1.0);
  CHECK(m.mean() == 1.0);
  CHECK(support_confidence(1, 1).weights(0, 0) == 1.0);
  CHECK_THROWS_AS(support_confidence(0, 3), ValidationError);
}

TEST_CASE("a consistent pseudo-target of a textured plane is trusted where both views see it") {
  PlaneRig rig;
  const ImageBuffer pseudo = plane_image(rig.pseudo);
  const RepairConfig cfg;
  const ConfidenceMap m =
      build_confidence_map(pseudo, rig.pseudo, rig.alpha, rig.depth, {{&rig.support, &rig.support_img}}, cfg);
  // Pseudo camera is shifted by 0.15 at depth 3: 3 px of disparity, so the
  // rightmost columns have no support sample.
  for (int y = 10; y < 54; ++y) {
    for (int x = 10; x < 50; ++x) CHECK(m.weights(x, y) > 0.99);
  }
  CHECK(m.raw(63, 30) == doctest::Approx(cfg.gamma));
}

TEST_CASE("an injected patch is down-weighted and the rest of the map is untouched") {
  PlaneRig rig;
  const RepairConfig cfg;
  const ImageBuffer clean = plane_image(rig.pseudo);
  ImageBuffer patched = clean;
  const int px = 20, py = 22, size = 20;
  for (int y = py; y < py + size; ++y) {
    for (int x = px; x < px + size; ++x) patched.set_rgb(x, y, patched.rgb(x, y) + Eigen::Vector3d::Constant(0.3));
  }
  const std::vector<SupportView> sv{{&rig.support, &rig.support_img}};
  const ConfidenceMap base = build_confidence_map(clean, rig.pseudo, rig.alpha, rig.depth, sv, cfg);
  const ConfidenceMap m = build_confidence_map(patched, rig.pseudo, rig.alpha, rig.depth, sv, cfg);
  const double bound = std::exp(-0.3 * 0.3 / (2 * cfg.sigma_e * cfg.sigma_e)) + 0.05;
  const int r = cfg.smooth_k / 2;
  // Pixels whose whole window lies inside the patch.
  for (int y = py + r; y < py + size - r; ++y) {
    for (int x = px + r; x < px + size - r; ++x) CHECK(m.weights(x, y) < bound);
  }
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool halo = x >= px - r && x < px + size + r && y >= py - r && y < py + size + r;
      if (!halo) CHECK(m.weights(x, y) == base.weights(x, y));
    }
  }
}

TEST_CASE("an uncovered scaffold gives zero weight everywhere") {
  PlaneRig rig;
  const ImageBuffer pseudo = plane_image(rig.pseudo);
  const ImageBuffer zero(64, 64, 1);
  const ConfidenceMap m = build_confidence_map(pseudo, rig.pseudo, zero, zero, {{&rig.support, &rig.support_img}}, {});
  CHECK(m.weights.flat().maxCoeff() == 0.0);
  // Coverage without depth also takes the zero branch.
  const ConfidenceMap n =
      build_confidence_map(pseudo, rig.pseudo, rig.alpha, zero, {{&rig.support, &rig.support_img}}, {});
  CHECK(n.weights.flat().maxCoeff() == 0.0);
}

TEST_CASE("confidence maps are deterministic and reject mismatched inputs") {
  PlaneRig rig;
  const ImageBuffer pseudo = plane_image(rig.pseudo);
  const std::vector<SupportView> sv{{&rig.support, &rig.support_img}};
  const ConfidenceMap a = build_confidence_map(pseudo, rig.pseudo, rig.alpha, rig.depth, sv, {});
  const ConfidenceMap b = build_confidence_map(pseudo, rig.pseudo, rig.alpha, rig.depth, sv, {});
  CHECK(a.weights == b.weights);
  CHECK(a.raw == b.raw);
  CHECK_THROWS_AS(build_confidence_map(ImageBuffer(32, 64, 3), rig.pseudo, rig.alpha, rig.depth, sv, {}),
                  ContractError);
}
