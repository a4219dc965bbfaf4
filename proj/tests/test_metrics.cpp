#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "depthgen/metrics.hpp"
#include "depthgen/params.hpp"

using namespace depthgen;

namespace {

/// Brute-force per-pixel re-derivation of every metric, written against
/// the definitions rather than the implementation.
MetricsReport oracle(const Tensor& pred, const Tensor& gt, bool align) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < gt.numel(); ++i)
    if (pred[i] > 0.0 && gt[i] > 0.0) idx.push_back(i);
  REQUIRE(!idx.empty());

  double scale = 1.0;
  if (align) {
    double sp = 0.0, sg = 0.0;
    for (std::size_t i : idx) {
      sp += pred[i];
      sg += gt[i];
    }
    scale = (sg / static_cast<double>(idx.size())) / (sp / static_cast<double>(idx.size()));
  }
  MetricsReport r;
  r.valid_pixels = idx.size();
  double se = 0.0, sel = 0.0;
  for (std::size_t i : idx) {
    const double d = gt[i], dh = pred[i] * scale;
    r.mae += std::abs(dh - d);
    r.abs_rel += std::abs(dh - d) / d;
    r.sq_rel += (dh - d) * (dh - d) / d;
    se += (dh - d) * (dh - d);
    sel += std::pow(std::log(dh) - std::log(d), 2.0);
    r.log10_err += std::abs(std::log10(dh) - std::log10(d));
    const double rt = std::max(dh / d, d / dh);
    r.delta1 += rt < 1.25;
    r.delta2 += rt < 1.5625;
    r.delta3 += rt < 1.953125;
  }
  const double n = static_cast<double>(idx.size());
  r.mae /= n;
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(se / n);
  r.rmse_log = std::sqrt(sel / n);
  r.log10_err /= n;
  r.delta1 /= n;
  r.delta2 /= n;
  r.delta3 /= n;
  return r;
}

void check_close(const MetricsReport& a, const MetricsReport& b, double tol) {
  CHECK(a.mae == doctest::Approx(b.mae).epsilon(tol));
  CHECK(a.abs_rel == doctest::Approx(b.abs_rel).epsilon(tol));
  CHECK(a.sq_rel == doctest::Approx(b.sq_rel).epsilon(tol));
  CHECK(a.rmse == doctest::Approx(b.rmse).epsilon(tol));
  CHECK(a.rmse_log == doctest::Approx(b.rmse_log).epsilon(tol));
  CHECK(a.log10_err == doctest::Approx(b.log10_err).epsilon(tol));
  CHECK(a.delta1 == doctest::Approx(b.delta1).epsilon(tol));
  CHECK(a.delta2 == doctest::Approx(b.delta2).epsilon(tol));
  CHECK(a.delta3 == doctest::Approx(b.delta3).epsilon(tol));
  CHECK(a.valid_pixels == b.valid_pixels);
}

}  // namespace

TEST_CASE("align_mean: identity, exact scale cancellation, hand example") {
  Tensor gt({4}, {1.0, 2.0, 3.0, 4.0});
  Tensor mask({4}, {1.0, 1.0, 1.0, 1.0});
  Tensor same = align_mean(gt, gt, mask);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same[i] == gt[i]);

  Tensor twice = gt;
  for (std::size_t i = 0; i < 4; ++i) twice.data()[i] *= 2.0;
  Tensor back = align_mean(twice, gt, mask);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back[i] == gt[i]);

  Tensor g2({2}, {1.0, 2.0});
  Tensor p2({2}, {1.0, 3.0});
  Tensor m2({2}, {1.0, 1.0});
  Tensor a2 = align_mean(p2, g2, m2);
  CHECK(a2[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(a2[1] == doctest::Approx(2.25).epsilon(1e-15));

  Tensor empty({2}, {0.0, 0.0});
  CHECK_THROWS_AS(align_mean(p2, g2, empty), std::invalid_argument);
  CHECK_THROWS_AS(align_mean(p2, g2, mask), std::invalid_argument);  // mask shape
}

TEST_CASE("depth_metrics: perfect prediction and the two-pixel hand example") {
  Rng rng(1301);
  Tensor gt = init_uniform({5, 7}, 0.5, 4.0, rng);
  MetricsReport r = depth_metrics(gt, gt, true);
  CHECK(r.mae == 0.0);
  CHECK(r.abs_rel == 0.0);
  CHECK(r.sq_rel == 0.0);
  CHECK(r.rmse == 0.0);
  CHECK(r.rmse_log == 0.0);
  CHECK(r.log10_err == 0.0);
  CHECK(r.delta1 == 1.0);
  CHECK(r.delta2 == 1.0);
  CHECK(r.delta3 == 1.0);
  CHECK(r.valid_pixels == 35);

  Tensor g2({2}, {1.0, 2.0});
  Tensor p2({2}, {1.0, 3.0});
  MetricsReport h = depth_metrics(p2, g2, true);
  // aligned pred is [0.75, 2.25]: errors 0.25 each, ratios 4/3 and 9/8
  CHECK(h.mae == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(h.abs_rel == doctest::Approx(0.1875).epsilon(1e-15));
  CHECK(h.sq_rel == doctest::Approx(0.046875).epsilon(1e-15));
  CHECK(h.rmse == doctest::Approx(0.25).epsilon(1e-15));
  const double want_rl =
      std::sqrt((std::pow(std::log(0.75), 2) + std::pow(std::log(1.125), 2)) / 2.0);
  CHECK(h.rmse_log == doctest::Approx(want_rl).epsilon(1e-14));
  const double want_l10 =
      (std::abs(std::log10(0.75)) + std::abs(std::log10(1.125))) / 2.0;
  CHECK(h.log10_err == doctest::Approx(want_l10).epsilon(1e-14));
  CHECK(h.delta1 == 0.5);
  CHECK(h.delta2 == 1.0);
  CHECK(h.delta3 == 1.0);
}

TEST_CASE("depth_metrics: loop oracle with invalid pixels on both sides") {
  Rng rng(1303);
  for (int trial = 0; trial < 8; ++trial) {
    Tensor gt = init_uniform({8, 8}, 0.2, 5.0, rng);
    Tensor pred = init_uniform({8, 8}, 0.2, 5.0, rng);
    // sprinkle invalid depth on both maps
    for (int k = 0; k < 6; ++k) {
      gt.data()[rng.next_u64() % 64] = 0.0;
      pred.data()[rng.next_u64() % 64] = -0.3;
    }
    for (bool align : {false, true}) {
      MetricsReport got = depth_metrics(pred, gt, align);
      check_close(got, oracle(pred, gt, align), 1e-12);
      CHECK(got.rmse >= got.mae);
      CHECK(got.delta1 <= got.delta2);
      CHECK(got.delta2 <= got.delta3);
      CHECK(got.delta3 <= 1.0);
    }
  }
}

TEST_CASE("depth_metrics: alignment makes every metric scale invariant") {
  Rng rng(1307);
  Tensor gt = init_uniform({8, 8}, 0.2, 5.0, rng);
  Tensor pred = init_uniform({8, 8}, 0.2, 5.0, rng);
  MetricsReport base = depth_metrics(pred, gt, true);
  for (double c : {0.5, 3.7, 120.0}) {
    Tensor scaled = pred;
    for (std::size_t i = 0; i < scaled.numel(); ++i) scaled.data()[i] *= c;
    check_close(depth_metrics(scaled, gt, true), base, 1e-12);
  }
}

TEST_CASE("depth_metrics: rejection cases and mean_report") {
  Tensor a({2}, {1.0, 2.0});
  Tensor b({3}, {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(depth_metrics(a, b, false), std::invalid_argument);
  Tensor dead({2}, {0.0, -1.0});
  CHECK_THROWS_AS(depth_metrics(dead, a, false), std::invalid_argument);

  MetricsReport r1, r2;
  r1.mae = 1.0;
  r1.delta1 = 0.5;
  r1.valid_pixels = 10;
  r2.mae = 3.0;
  r2.delta1 = 1.0;
  r2.valid_pixels = 6;
  MetricsReport m = mean_report({r1, r2});
  CHECK(m.mae == 2.0);
  CHECK(m.delta1 == 0.75);
  CHECK(m.valid_pixels == 16);
  CHECK_THROWS_AS(mean_report({}), std::invalid_argument);
}
