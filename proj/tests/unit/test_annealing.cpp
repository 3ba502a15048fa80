#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mcbound/annealing.hpp"
#include "mcbound/error.hpp"

namespace mcbound::anneal {
namespace {

Objective square() {
  Objective o;
  o.name = "square";
  o.f = [](double x) { return x * x; };
  o.df = [](double x) { return 2.0 * x; };
  o.d2f = [](double) { return 2.0; };
  o.alpha = 2.0;
  o.x1 = 1.0;
  o.minima = {0.0};
  return o;
}

Objective flat() {
  Objective o = square();
  o.f = [](double) { return 0.0; };
  o.df = [](double) { return 0.0; };
  o.d2f = [](double) { return 0.0; };
  return o;
}

TEST(Objectives, BuiltinsValidate) {
  EXPECT_NO_THROW(Objective::quadratic().validate());
  EXPECT_NO_THROW(Objective::doublewell().validate());
  EXPECT_DOUBLE_EQ(Objective::doublewell().f_min(), 0.0);
  EXPECT_THROW(Objective::named("rosenbrock"), InvalidInput);
  EXPECT_NO_THROW(Proposal::parse("uniform:2").validate());
  EXPECT_THROW(Proposal::parse("gauss:-1"), InvalidInput);
}

TEST(AcceptProb, Cases) {
  const auto f = Objective::quadratic();
  EXPECT_DOUBLE_EQ(accept_prob(f, 2.0, 1.0, 3.0), 1.0);
  EXPECT_NEAR(accept_prob(f, 0.0, std::sqrt(2.0 * std::log(2.0)), 1.0), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(accept_prob(f, 0.0, 10.0, 0.0), 1.0);
  EXPECT_THROW(accept_prob(f, 0.0, 1.0, -1.0), InvalidInput);
}

TEST(Rwmh, ZeroGammaIsRandomWalk) {
  const auto f = Objective::doublewell();
  const auto q = Proposal::gaussian(1.0);
  Stream rng(1, 0);
  constexpr int kDraws = 40000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double z = rwmh_step(f, q, 0.7, 0.0, rng) - 0.7;
    sum += z;
    sq += z * z;
  }
  const double mean = sum / kDraws, var = sq / kDraws - mean * mean;
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(kDraws));
  EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(Rwmh, DetailedBalanceOnGrid) {
  const auto f = Objective::doublewell();
  const auto q = Proposal::gaussian(1.0);
  const TargetLaw pi(f, 3.0);
  for (double x = -2.0; x <= 2.0; x += 0.25)
    for (double y = -2.0; y <= 2.0; y += 0.3) {
      const double fwd = pi.density(x) * accept_prob(f, x, y, 3.0) * q.pdf(y - x);
      const double bwd = pi.density(y) * accept_prob(f, y, x, 3.0) * q.pdf(x - y);
      EXPECT_NEAR(fwd, bwd, 1e-12 * std::max(1.0, fwd));
    }
}

TEST(TargetLaw, QuadraticNormalizer) {
  EXPECT_NEAR(TargetLaw(Objective::quadratic(), 2.0).Z(), 1.772453850905516, 1e-8);
  for (double g : {0.5, 1.0, 4.0}) EXPECT_NEAR(TargetLaw(Objective::quadratic(), g).Z(), std::sqrt(2 * M_PI / g), 1e-8);
}

TEST(TargetLaw, DoubleWellNormalizers) {
  const auto f = Objective::doublewell();
  EXPECT_NEAR(TargetLaw(f, 10.0).Z(), 0.5725340616789123, 1e-8);
  EXPECT_NEAR(TargetLaw(f, 20.0).Z(), 0.40027658082067617, 1e-8);
  EXPECT_NEAR(TargetLaw(f, 50.0).Z(), 0.25162427978067473, 1e-8);
}

TEST(TargetLaw, DensityIntegratesToOne) {
  const TargetLaw pi(Objective::doublewell(), 5.0);
  EXPECT_NEAR(pi.mass(-pi.half_width(), pi.half_width()), 1.0, 1e-8);
  EXPECT_LT(pi.tail_bound(), 1e-10);
}

TEST(TargetLaw, InvariantUnderOneKernelStep) {
  const auto f = Objective::doublewell();
  const auto q = Proposal::gaussian(1.0);
  const TargetLaw pi(f, 2.0);
  for (double y : {-1.5, -1.0, -0.3, 0.0, 0.4, 1.0, 1.7})
    EXPECT_NEAR(kernel_pushforward_density(f, q, pi, y), pi.density(y), 1e-6) << "y=" << y;
}

TEST(Minorization, SquareOnUnitInterval) {
  const auto q = Proposal::gaussian(1.0);
  const auto m = minorization_gamma({-1.0, 1.0}, 1.0, q, square());
  EXPECT_NEAR(m.eps_q, 0.053990966513188052, 1e-15);
  EXPECT_NEAR(m.d, 1.0, 1e-12);
  EXPECT_NEAR(m.eps_gamma, 0.039724333178355353, 1e-12);
  EXPECT_NEAR(minorization_gamma({-1.0, 1.0}, 0.0, q, square()).eps_gamma, 2.0 * m.eps_q, 1e-15);
}

TEST(Minorization, ConstantObjectiveIgnoresGamma) {
  const auto q = Proposal::gaussian(1.0);
  const auto a = minorization_gamma({-1.0, 1.0}, 1.0, q, flat());
  const auto b = minorization_gamma({-1.0, 1.0}, 30.0, q, flat());
  EXPECT_DOUBLE_EQ(a.d, 0.0);
  EXPECT_DOUBLE_EQ(a.eps_gamma, b.eps_gamma);
}

TEST(Minorization, VanishingProposalIsDegenerate) {
  EXPECT_THROW(minorization_gamma({-1.0, 1.0}, 1.0, Proposal::uniform(1.0), square()), Degenerate);
}

TEST(RGammaS, Values) {
  EXPECT_DOUBLE_EQ(r_gamma_s(2.0, 1.0), 1.25);
  EXPECT_NEAR(r_gamma_s(3.0, 1.0), 1.1481481481481481, 1e-15);
  EXPECT_NEAR(r_gamma_s(1e6, 1.0), 1.0, 1e-5);
  EXPECT_THROW(r_gamma_s(1.0, 1.0), InvalidInput);
}

TEST(PhiGammaS, MaximumAtPredictedPoint) {
  for (auto [g, s] : {std::pair{3.0, 1.0}, std::pair{2.0, 1.0}, std::pair{10.0, 2.5}}) {
    const double r = r_gamma_s(g, s);
    const double u_star = std::pow((g - s) / g, 1.0 / s);
    double best = -1.0, arg = 0.0;
    for (int i = 1; i <= 200000; ++i) {
      const double u = 5.0 * i / 200000.0;
      const double v = phi_gamma_s(u, g, s);
      if (v > best) {
        best = v;
        arg = u;
      }
    }
    EXPECT_LE(best, r + 1e-9);
    EXPECT_NEAR(arg, u_star, 1e-3);
    EXPECT_NEAR(phi_gamma_s(u_star, g, s), r, 1e-12);
  }
}

TEST(KvRatio, BelowRAcrossGrid) {
  const auto f = Objective::doublewell();
  const auto q = Proposal::gaussian(1.0);
  const double s = 1.0;
  for (double g : {2.0 * s, 4.0 * s, 10.0 * s}) {
    const double r = r_gamma_s(g, s);
    for (double x = -20.0; x <= 20.0; x += 0.5) EXPECT_LE(kv_ratio(f, q, x, g, s), r + 1e-6) << x << " " << g;
  }
}

TEST(DriftConstants, DoubleWellMatchesIndependentRecipe) {
  const auto k = derive_drift_constants(Objective::doublewell(), Proposal::gaussian(1.0), 0.75);
  EXPECT_NEAR(k.eps_slack, 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(k.M, 1.3829941271006384, 1e-9);
  EXPECT_NEAR(k.s, 2.2918246531630482, 1e-7);
  EXPECT_NEAR(k.x_underline, 2.5829941271006384, 1e-9);
  EXPECT_NEAR(k.gamma_underline, 7.0848711850168913, 1e-6);
  EXPECT_NEAR(k.c0, 1.0462703644367486e32, 1e-5 * 1.0462703644367486e32);
  EXPECT_DOUBLE_EQ(k.lambda0, 0.75);
  EXPECT_DOUBLE_EQ(k.lambda, 0.875);
  EXPECT_LE(r_gamma_s(k.gamma_underline, k.s) * (1 + k.eps_slack) / 2 + k.eps_slack / 2, 0.75 + 1e-12);
}

TEST(DriftConstants, QuadraticRecipeAndGridChecks) {
  const auto f = Objective::quadratic();
  const auto q = Proposal::gaussian(1.0);
  const auto k = derive_drift_constants(f, q, 0.75);
  EXPECT_NEAR(k.s, 4.5836493063260965, 1e-7);
  EXPECT_NEAR(k.x_underline, 2.3829941271006384, 1e-9);
  EXPECT_NEAR(k.gamma_underline, 14.169742370033783, 1e-6);
  EXPECT_NEAR(k.c0, 448873.01044594533, 1e-5 * 448873.0);
  const auto report = check_drift_constants(f, q, k);
  EXPECT_TRUE(report.passed(1e-6)) << report.ratio_excess << " " << report.tail_excess << " "
                                   << report.univariate_excess << " " << report.bivariate_excess;
}

TEST(DriftConstants, CompactProposalUsesItsSupport) {
  const auto k = derive_drift_constants(Objective::quadratic(), Proposal::uniform(1.5), 0.75);
  EXPECT_DOUBLE_EQ(k.M, 1.5);
}

TEST(DriftConstants, RejectsBetaOutOfRange) {
  EXPECT_THROW(derive_drift_constants(Objective::quadratic(), Proposal::gaussian(1.0), 0.5), InvalidInput);
  EXPECT_THROW(derive_drift_constants(Objective::quadratic(), Proposal::gaussian(1.0), 1.0), InvalidInput);
}

TEST(Cooling, Values) {
  EXPECT_DOUBLE_EQ(cooling_gamma(0, {2.0, 0.5, 3.0}), 3.0);
  EXPECT_NEAR(cooling_gamma(9, {1.0, 0.0, 1.0}), 3.3025850929940457, 1e-15);
  EXPECT_THROW(cooling_gamma(1, {0.0, 0.0, 1.0}), InvalidInput);
  double prev = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const double g = cooling_gamma(i, {1.5, 0.2, 2.0});
    EXPECT_GE(g, prev);
    prev = g;
  }
}

TEST(Cooling, EpsilonScalesAsPowerOfIndex) {
  const auto m0 = minorization_gamma({-1.0, 1.0}, 0.0, Proposal::gaussian(1.0), square());
  for (double xi : {0.0, 0.5}) {
    const CoolingSchedule sched{m0.d, xi, 2.0};
    const double ref = schedule_epsilon(0, sched, m0);
    for (std::size_t i : {1u, 9u, 99u, 9999u}) {
      const double ratio = schedule_epsilon(i, sched, m0) / std::pow(1.0 + i, -1.0 / (1.0 + xi));
      EXPECT_NEAR(ratio / ref, 1.0, 1e-12);
    }
  }
}

TEST(Cooling, EpsilonSumDiverges) {
  const auto f = Objective::doublewell();
  const auto q = Proposal::gaussian(1.0);
  const auto k = derive_drift_constants(f, q, 0.75);
  const auto m0 = minorization_gamma(k.level_set, 0.0, q, f);
  const CoolingSchedule sched{k.d, 0.0, k.gamma_underline};
  const double ref = schedule_epsilon(0, sched, m0);
  ASSERT_GT(ref, 0.0);
  double partial = 0.0;
  for (std::size_t i = 0; i < 1000000; ++i) partial += schedule_epsilon(i, sched, m0) / ref;
  EXPECT_GT(partial, 10.0);
}

TEST(Annealing, FrozenStationaryStartStaysNearTarget) {
  AnnealConfig cfg;
  cfg.frozen = true;
  cfg.frozen_gamma = 2.0;
  cfg.start_from_target = true;
  cfg.start_gamma = 2.0;
  cfg.replicas = 4000;
  cfg.checkpoints = {1, 20, 200};
  cfg.bin_width = 0.5;
  cfg.seed = 8;
  const auto r = run_annealing(Objective::quadratic(), Proposal::gaussian(1.0), cfg);
  ASSERT_EQ(r.checkpoints.size(), 3u);
  for (const auto& cp : r.checkpoints) EXPECT_LE(cp.tv_estimate, 0.12) << "n=" << cp.n;
}

TEST(Annealing, SymmetricStartBalancesWells) {
  AnnealConfig cfg;
  cfg.frozen = true;
  cfg.frozen_gamma = 4.0;
  cfg.x0 = 0.0;
  cfg.replicas = 6000;
  cfg.checkpoints = {300};
  cfg.seed = 9;
  const auto cp = run_annealing(Objective::doublewell(), Proposal::gaussian(1.0), cfg).checkpoints.front();
  ASSERT_EQ(cp.mass_near.size(), 2u);
  const double se = std::hypot(cp.mass_near_se[0], cp.mass_near_se[1]);
  EXPECT_LE(std::abs(cp.mass_near[0] - cp.mass_near[1]), 3.0 * se);
}

TEST(Annealing, DeterministicAcrossThreadCounts) {
  AnnealConfig cfg;
  cfg.schedule = {4.0, 0.0, 1.0};
  cfg.x0 = 2.0;
  cfg.replicas = 500;
  cfg.checkpoints = {10, 50};
  cfg.seed = 10;
  cfg.threads = 1;
  const auto a = run_annealing(Objective::doublewell(), Proposal::gaussian(1.0), cfg);
  cfg.threads = 3;
  const auto b = run_annealing(Objective::doublewell(), Proposal::gaussian(1.0), cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.checkpoints[i].counts, b.checkpoints[i].counts);
    EXPECT_EQ(a.checkpoints[i].tv_estimate, b.checkpoints[i].tv_estimate);
  }
}

TEST(PiShift, EqualTemperatures) {
  const auto r = pi_shift_tv_bound(Objective::quadratic(), 2.0, 2.0);
  EXPECT_EQ(r.bound, 0.0);
  EXPECT_EQ(r.exact_tv, 0.0);
}

TEST(PiShift, QuadraticOracle) {
  const auto r = pi_shift_tv_bound(Objective::quadratic(), 1.0, 4.0);
  EXPECT_NEAR(r.bound, 1.3862943611198906, 1e-8);
  EXPECT_NEAR(r.exact_tv, 0.64534913766953733, 1e-8);
  EXPECT_TRUE(r.hypothesis_holds);
}

TEST(PiShift, TelescopedSumStaysBelowBound) {
  const auto f = Objective::doublewell();
  const CoolingSchedule sched{2.0, 0.0, 1.0};
  for (std::size_t m : {0u, 5u}) {
    const std::size_t n = m + 30;
    double sum = 0.0;
    for (std::size_t l = m; l < n; ++l) sum += pi_shift_tv_bound(f, cooling_gamma(l, sched), cooling_gamma(l + 1, sched)).exact_tv;
    const double total = 2.0 * std::log(TargetLaw(f, cooling_gamma(m, sched)).Z() / TargetLaw(f, cooling_gamma(n, sched)).Z());
    EXPECT_LE(sum, total + 1e-8);
  }
}

TEST(Laplace, ClosedForms) {
  for (double g : {0.5, 2.0, 30.0}) EXPECT_NEAR(laplace_Z(Objective::quadratic(), g), std::sqrt(2 * M_PI / g), 1e-14);
  EXPECT_NEAR(laplace_Z(Objective::doublewell(), 50.0), std::sqrt(M_PI / 50.0), 1e-14);
  Objective no_minima = Objective::quadratic();
  no_minima.minima.clear();
  EXPECT_THROW(laplace_Z(no_minima, 1.0), InvalidInput);
}

TEST(Laplace, RelativeErrorShrinksWithGamma) {
  const auto f = Objective::doublewell();
  double prev = 1.0;
  for (double g : {10.0, 20.0, 50.0}) {
    const double z = TargetLaw(f, g).Z();
    const double err = std::abs(laplace_Z(f, g) - z) / z;
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LE(prev, 0.05);
}

}  // namespace
}  // namespace mcbound::anneal
