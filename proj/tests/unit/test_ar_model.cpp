#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mcbound/ar_model.hpp"
#include "mcbound/error.hpp"

namespace mcbound::ar {
namespace {

ARModel reference_model() {
  ARModel m;
  m.g = MapFunction::linear(0.5);
  m.q = NoiseDensity::gaussian(1.0);
  m.delta = 4.0;
  m.lambda = 0.8;
  return m;
}

// Two-sample Kolmogorov-Smirnov test with the asymptotic distribution
// (Stephens' small-sample correction).
double ks_p_value(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) sum += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(sum, 0.0, 1.0);
}

TEST(KsHelper, SeparatesShiftedSamples) {
  Stream rng(1, 0);
  std::vector<double> a(4000), b(4000), c(4000);
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal();
  for (auto& x : c) x = rng.normal(0.2);
  EXPECT_GT(ks_p_value(a, b), 1e-3);
  EXPECT_LT(ks_p_value(a, c), 1e-6);
}

TEST(EpsDelta, ReferenceModel) {
  const auto r = eps_delta_report(reference_model());
  EXPECT_NEAR(r.epsilon, 0.3173105078629141, 1e-6);
  EXPECT_NEAR(r.closed_form, 0.3173105078629141, 1e-12);
  EXPECT_NEAR(r.quadrature, r.closed_form, 1e-6);
  EXPECT_DOUBLE_EQ(r.worst_shift, 2.0);
}

TEST(EpsDelta, ZeroShiftIsOne) {
  EXPECT_DOUBLE_EQ(overlap_at_shift(NoiseDensity::gaussian(1.0), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(overlap_closed_form(NoiseDensity::gaussian(1.0), 0.0), 1.0);
}

TEST(EpsDelta, NonincreasingAndVanishing) {
  auto m = reference_model();
  double prev = 1.0;
  for (double delta : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    m.delta = delta;
    const double e = eps_delta(m);
    EXPECT_LE(e, prev);
    EXPECT_GT(e, 0.0);
    prev = e;
  }
  m.delta = 40.0;
  EXPECT_LT(eps_delta(m), 1e-12);
}

TEST(EpsDelta, LogisticClosedFormAgrees) {
  auto m = reference_model();
  m.q = NoiseDensity::logistic(0.7);
  const auto r = eps_delta_report(m);
  EXPECT_NEAR(r.quadrature, r.closed_form, 1e-6);
}

TEST(EpsDelta, TabulatedDensityScansShifts) {
  auto m = reference_model();
  m.q = NoiseDensity::tabulated({-3.0, 0.0, 3.0}, {0.0, 1.0, 0.0}, false);
  m.delta = 2.0;
  const auto r = eps_delta_report(m, 201);
  EXPECT_TRUE(std::isnan(r.closed_form));
  // Triangular density on [-3, 3]: overlap at shift u is 1 - (1 - (1 - u/6)^2) = (1 - u/6)^2.
  EXPECT_NEAR(r.epsilon, std::pow(1.0 - 1.0 / 6.0, 2), 1e-6);
}

TEST(ArBound, ConstantB) {
  const auto m = reference_model();
  EXPECT_NEAR(ar_B(m, eps_delta(m)), 3.3533618651713574, 1e-6);
}

TEST(ArBound, LastIndexAndPointStarts) {
  const auto m = reference_model();
  const double eps = eps_delta(m), B = ar_B(m, eps);
  EXPECT_NEAR(ar_bound(m, eps, 5, 6, 2.0), 2.0 * std::pow(0.8, 5) * std::pow(B, 5) * 2.0, 1e-12);
  EXPECT_NEAR(ar_bound(m, eps, 5, 2, 1.0), 2.0 * std::pow(1 - eps, 2) + 2.0 * std::pow(0.8, 5) * B, 1e-12);
}

TEST(ArBound, RejectsSmallDelta) {
  auto m = reference_model();
  m.delta = 0.5;
  EXPECT_THROW(ar_bound(m, 0.5, 3, 1, 1.0), InvalidInput);
}

TEST(Model, RejectsBadLambda) {
  auto m = reference_model();
  m.lambda = 0.4;
  EXPECT_THROW(m.validate(), InvalidInput);
  m.lambda = 1.0;
  EXPECT_THROW(m.validate(), InvalidInput);
}

TEST(Parse, Specs) {
  EXPECT_DOUBLE_EQ(MapFunction::parse("tanh:0.3").lipschitz, 0.3);
  EXPECT_DOUBLE_EQ(NoiseDensity::parse("gauss:2").pdf(0.0), 1.0 / (2.0 * std::sqrt(2.0 * M_PI)));
  EXPECT_THROW(NoiseDensity::parse("cauchy:1"), InvalidInput);
  EXPECT_THROW(MapFunction::parse("linear:x"), InvalidInput);
}

TEST(CoupledStep, CommonNoiseIsDeterministicGivenDraw) {
  const ARCoupling c(reference_model(), 0.3);
  Stream a(9, 0), b(9, 0);
  const auto s = c.coupled_step({0.0, 5.0, false}, a);
  const double z = c.model().q.sample(b);
  EXPECT_DOUBLE_EQ(s.x, z);
  EXPECT_DOUBLE_EQ(s.x_prime, 2.5 + z);
  EXPECT_FALSE(s.bell);
}

TEST(CoupledStep, CommonNoiseContractsPathwise) {
  const ARCoupling c(reference_model(), 0.3);
  Stream rng(10, 0);
  for (int i = 0; i < 2000; ++i) {
    const double x = -20.0 + 0.02 * i, xp = x + 4.5 + 0.01 * (i % 100);
    const auto s = c.coupled_step({x, xp, false}, rng);
    EXPECT_NEAR(std::abs(s.x - s.x_prime), 0.5 * std::abs(x - xp), 1e-9);
  }
}

TEST(CoupledStep, DriftIdentityOffSet) {
  const auto m = reference_model();
  const ARCoupling c(m, 0.3);
  Stream rng(12, 0);
  for (double sep : {4.5, 7.0, 12.0}) {
    const auto s = c.coupled_step({1.0, 1.0 + sep, false}, rng);
    EXPECT_NEAR(1.0 + std::abs(s.x - s.x_prime), 1.0 + 0.5 * sep, 1e-12);
    EXPECT_LE(1.0 + 0.5 * sep, m.lambda * (1.0 + sep));
  }
}

TEST(CoupledStep, LambdaDriftOnGrid) {
  const auto m = reference_model();
  m.require_bound_delta();
  for (double d = m.delta + 1e-6; d < 100.0; d += 0.25) EXPECT_LE(1.0 + m.L() * d, m.lambda * (1.0 + d));
}

TEST(CoupledStep, CertainHeadsCouples) {
  const ARCoupling c(reference_model(), 1.0);
  Stream rng(13, 0);
  for (int i = 0; i < 200; ++i) {
    const auto s = c.coupled_step({0.0, 1.0, false}, rng);
    EXPECT_TRUE(s.bell);
    EXPECT_EQ(s.x, s.x_prime);
  }
}

TEST(CoupledStep, BellIsAbsorbing) {
  const ARCoupling c(reference_model());
  Stream rng(14, 0);
  ARState s{0.3, 0.3, true};
  for (int i = 0; i < 100; ++i) {
    s = c.coupled_step(s, rng);
    ASSERT_TRUE(s.bell);
    ASSERT_EQ(s.x, s.x_prime);
  }
}

TEST(CoupledStep, MarginalsMatchPlainStep) {
  const ARCoupling c(reference_model());
  constexpr int kDraws = 20000;
  for (const ARState start : {ARState{0.0, 1.5, false}, ARState{-1.0, 3.0, false}, ARState{0.0, 6.0, false}}) {
    std::vector<double> xs, xps, direct, direct_p;
    Stream coupled(15, 0), plain(16, 0);
    for (int i = 0; i < kDraws; ++i) {
      const auto s = c.coupled_step(start, coupled);
      xs.push_back(s.x);
      xps.push_back(s.x_prime);
      direct.push_back(c.step(start.x, plain));
      direct_p.push_back(c.step(start.x_prime, plain));
    }
    EXPECT_GT(ks_p_value(xs, direct), 1e-3) << start.x << "," << start.x_prime;
    EXPECT_GT(ks_p_value(xps, direct_p), 1e-3) << start.x << "," << start.x_prime;
  }
}

TEST(RunArCoupling, DeterministicAndMonotone) {
  const ARCoupling c(reference_model());
  ARRunConfig cfg;
  cfg.x0 = 0.0;
  cfg.x0_prime = 8.0;
  cfg.horizon = 15;
  cfg.replicas = 4000;
  cfg.seed = 3;
  const auto a = run_ar_coupling(c, cfg);
  cfg.threads = 3;
  EXPECT_EQ(run_ar_coupling(c, cfg), a);
  for (std::size_t n = 1; n <= 15; ++n) EXPECT_LE(a.p_uncoupled[n], a.p_uncoupled[n - 1]);
}

TEST(ThresholdLowerBound, BelowArBound) {
  const ARCoupling c(reference_model());
  ARRunConfig cfg;
  cfg.x0 = 0.0;
  cfg.x0_prime = 6.0;
  cfg.horizon = 10;
  cfg.replicas = 20000;
  cfg.seed = 4;
  std::vector<double> thresholds;
  for (double t = -6.0; t <= 6.0; t += 0.25) thresholds.push_back(t);
  const auto lb = threshold_tv_lower_bound(c, cfg, thresholds);
  ASSERT_EQ(lb.lower.size(), 11u);
  for (std::size_t n = 1; n <= 10; ++n) {
    double best = 1e300;
    for (std::size_t j = 1; j <= n + 1; ++j) best = std::min(best, ar_bound(c.model(), c.epsilon(), n, j, 7.0));
    EXPECT_GE(best, lb.lower[n]);
  }
}

TEST(Discretize, RowsStochasticAndPointMass) {
  const auto k = discretize(reference_model(), -10.0, 10.0, 201);
  EXPECT_EQ(k.size(), 201u);
  const Measure p = grid_point_mass(-10.0, 10.0, 201, 0.04);
  EXPECT_DOUBLE_EQ(p(100), 1.0);
  EXPECT_DOUBLE_EQ(p.sum(), 1.0);
}

}  // namespace
}  // namespace mcbound::ar
