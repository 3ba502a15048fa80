#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mcbound/error.hpp"
#include "mcbound/quadrature.hpp"
#include "mcbound/rng.hpp"

namespace mcbound {
namespace {

TEST(Integrate, Polynomial) {
  const auto r = integrate([](double x) { return 3 * x * x; }, 0.0, 2.0);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 8.0, 1e-12);
}

TEST(Integrate, GaussianMass) {
  const auto r = integrate([](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI); }, -12.0, 12.0, 1e-12);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(Integrate, KinkAtBreakpoint) {
  const std::vector<double> knots{0.3};
  const auto r = integrate([](double x) { return std::abs(x - 0.3); }, -1.0, 1.0, 1e-12, knots);
  EXPECT_NEAR(r.value, 0.5 * 1.3 * 1.3 + 0.5 * 0.7 * 0.7, 1e-12);
}

TEST(Integrate, EmptyInterval) { EXPECT_DOUBLE_EQ(integrate([](double) { return 1.0; }, 1.0, 1.0).value, 0.0); }

TEST(Integrate, ReportsNonConvergence) {
  const auto osc = [](double x) { return std::sin(1.0 / x); };
  EXPECT_THROW(integrate_or_throw(osc, 1e-9, 1.0, 1e-15), Degenerate);
}

TEST(Stream, ReproducibleAndIndexed) {
  Stream a(5, 1), b(5, 1), c(5, 2);
  const double x = a.uniform();
  EXPECT_EQ(x, b.uniform());
  EXPECT_NE(x, c.uniform());
}

TEST(Stream, CategoricalFollowsCumulativeTable) {
  Stream s(6, 0);
  const std::vector<double> cdf{0.2, 0.2, 1.0};
  std::vector<int> hits(3, 0);
  for (int i = 0; i < 10000; ++i) ++hits[s.categorical(cdf)];
  EXPECT_EQ(hits[1], 0);
  EXPECT_NEAR(hits[0] / 10000.0, 0.2, 0.02);
}

}  // namespace
}  // namespace mcbound
