#include <gtest/gtest.h>

#include <cmath>

#include "mcbound/chain_model.hpp"
#include "mcbound/error.hpp"

namespace mcbound {
namespace {

FiniteKernel two_state() { return FiniteKernel::from_rows({{0.7, 0.3}, {0.4, 0.6}}); }

FiniteKernel reflecting_walk() {
  return FiniteKernel::from_rows({{0.5, 0.5, 0.0}, {0.25, 0.5, 0.25}, {0.0, 0.5, 0.5}});
}

Measure vec(std::initializer_list<double> v) {
  Measure m(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(i++) = x;
  return m;
}

TEST(FiniteKernel, RejectsNonStochasticRows) {
  EXPECT_THROW(FiniteKernel::from_rows({{0.5, 0.6}, {0.5, 0.5}}), InvalidInput);
  EXPECT_THROW(FiniteKernel::from_rows({{1.2, -0.2}, {0.5, 0.5}}), InvalidInput);
  EXPECT_THROW(FiniteKernel::from_rows({{1.0, 0.0}}), InvalidInput);
  EXPECT_THROW(FiniteKernel(Eigen::MatrixXd(0, 0)), InvalidInput);
}

TEST(FiniteKernel, DefaultLabels) {
  const FiniteKernel k(Eigen::MatrixXd::Identity(3, 3));
  ASSERT_EQ(k.size(), 3u);
  EXPECT_EQ(k.states()[2], "2");
}

TEST(Propagate, ZeroStepsIsIdentity) {
  const Measure xi = vec({0.2, 0.8});
  EXPECT_EQ(propagate(xi, two_state(), 0), xi);
}

TEST(Propagate, OneStepFromPointMass) {
  const Measure out = propagate(vec({1.0, 0.0}), two_state(), 1);
  EXPECT_DOUBLE_EQ(out(0), 0.7);
  EXPECT_DOUBLE_EQ(out(1), 0.3);
}

TEST(Propagate, StationaryLawIsFixed) {
  const Measure pi = vec({4.0 / 7.0, 3.0 / 7.0});
  const Measure out = propagate(pi, two_state(), 25);
  EXPECT_NEAR(out(0), pi(0), 1e-14);
  EXPECT_NEAR(out(1), pi(1), 1e-14);
}

TEST(Propagate, Semigroup) {
  const auto k = reflecting_walk();
  const Measure xi = vec({0.1, 0.3, 0.6});
  const Measure a = propagate(xi, k, 7);
  const Measure b = propagate(propagate(xi, k, 3), k, 4);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Norms, FNormMatchesSignEnumeration) {
  EXPECT_DOUBLE_EQ(f_norm(vec({0.3, -0.3}), WeightFunction(vec({1.0, 2.0}))), 0.9);
  EXPECT_DOUBLE_EQ(f_norm(vec({0.0, 0.0}), WeightFunction(vec({1.0, 2.0}))), 0.0);
  EXPECT_DOUBLE_EQ(f_norm(vec({0.5}), WeightFunction(vec({3.0}))), 1.5);
}

TEST(Norms, UnitWeightIsTotalVariation) {
  const Measure mu = vec({0.25, -0.5, 0.25});
  EXPECT_DOUBLE_EQ(f_norm(mu, WeightFunction::constant(3)), tv_norm(mu));
  EXPECT_DOUBLE_EQ(tv_norm(mu), 1.0);
  EXPECT_LE(f_norm(mu, WeightFunction(vec({1, 1, 1}))), f_norm(mu, WeightFunction(vec({1, 2, 1}))));
}

TEST(WeightFunction, RejectsValuesBelowOne) { EXPECT_THROW(WeightFunction(vec({1.0, 0.5})), InvalidInput); }

TEST(Stationary, TwoStateClosedForm) {
  const Measure pi = stationary(two_state());
  EXPECT_NEAR(pi(0), 4.0 / 7.0, 1e-12);
  EXPECT_NEAR(pi(1), 3.0 / 7.0, 1e-12);
}

TEST(Stationary, SingletonAndDoublyStochastic) {
  EXPECT_DOUBLE_EQ(stationary(FiniteKernel::from_rows({{1.0}}))(0), 1.0);
  const Measure pi = stationary(FiniteKernel::from_rows({{0.2, 0.5, 0.3}, {0.3, 0.2, 0.5}, {0.5, 0.3, 0.2}}));
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(pi(i), 1.0 / 3.0, 1e-12);
}

TEST(Stationary, ReducibleChainIsDegenerate) {
  const auto k = FiniteKernel::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_FALSE(is_irreducible(k));
  EXPECT_THROW(stationary(k), Degenerate);
}

TEST(Minorization, WorkedTwoStatePair) {
  const auto cert = extract_minorization(two_state(), {{0, 1}});
  EXPECT_DOUBLE_EQ(cert.epsilon(), 0.7);
  EXPECT_NEAR(cert.nu()[0](0), 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(cert.nu()[0](1), 3.0 / 7.0, 1e-15);
  EXPECT_TRUE(cert.contains(0, 1));
  EXPECT_FALSE(cert.contains(1, 0));
}

TEST(Minorization, IdenticalRowsGiveFullOverlap) {
  const auto k = FiniteKernel::from_rows({{0.3, 0.7}, {0.3, 0.7}});
  EXPECT_DOUBLE_EQ(extract_minorization(k, {{0, 1}}).epsilon(), 1.0);
}

TEST(Minorization, DisjointSupportIsDegenerate) {
  const auto k = FiniteKernel::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const auto cert = extract_minorization(k, {{0, 1}});
  EXPECT_TRUE(cert.degenerate());
  EXPECT_DOUBLE_EQ(cert.epsilon(), 0.0);
}

TEST(Minorization, ExtractedCertificatesValidate) {
  const auto k = reflecting_walk();
  for (const auto& pairs : std::vector<std::vector<StatePair>>{{{0, 1}}, {{0, 1}, {1, 2}}, square_pairs({true, true, false})})
    EXPECT_NO_THROW(validate_certificate(k, extract_minorization(k, pairs)));
  const auto bad = extract_minorization(k, {{0, 1}}).with_epsilon(0.5);
  EXPECT_NO_THROW(validate_certificate(k, bad));
  const MinorizationCertificate wrong(3, {{0, 2}}, {vec({1.0, 0.0, 0.0})}, 0.5);
  EXPECT_THROW(validate_certificate(k, wrong), InvalidInput);
}

TEST(Minorization, SmallSetUsesCommonMeasure) {
  const auto cert = small_set_certificate(reflecting_walk(), {true, true, false});
  EXPECT_DOUBLE_EQ(cert.epsilon(), 0.75);
  EXPECT_EQ(cert.pairs().size(), 4u);
  for (const auto& nu : cert.nu()) EXPECT_EQ(nu, cert.nu().front());
}

TEST(Drift, ReflectingWalkExample) {
  const auto d = verify_drift(reflecting_walk(), WeightFunction(vec({1, 2, 4})), {true, true, false});
  EXPECT_FALSE(d.violation);
  EXPECT_DOUBLE_EQ(d.lambda_min, 0.75);
  EXPECT_DOUBLE_EQ(d.b_min, 0.75);
}

TEST(Drift, ConstantFunctionCannotContract) {
  const auto d = verify_drift(reflecting_walk(), WeightFunction::constant(3), {true, false, false});
  EXPECT_TRUE(d.violation);
}

TEST(Drift, DeterministicIntoSet) {
  // Everything outside C = {0} jumps to 0, where V is smallest.
  const auto k = FiniteKernel::from_rows({{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}});
  const auto d = verify_drift(k, WeightFunction(vec({1, 3, 5})), {true, false, false});
  EXPECT_DOUBLE_EQ(d.lambda_min, 1.0 / 3.0);
}

TEST(Drift, WholeSpaceIsVacuous) {
  const auto d = verify_drift(reflecting_walk(), WeightFunction(vec({1, 2, 4})), {true, true, true});
  EXPECT_TRUE(d.vacuous);
}

TEST(Drift, HoldsAtCertifiedConstants) {
  const auto k = reflecting_walk();
  const WeightFunction v(vec({1, 2, 4}));
  const StateSet c{true, true, false};
  EXPECT_TRUE(drift_holds(k, v, c, 0.75, 0.75, 1e-12));
  EXPECT_FALSE(drift_holds(k, v, c, 0.74, 0.75, 1e-12));
  EXPECT_FALSE(drift_holds(k, v, c, 0.75, 0.7, 1e-12));
}

TEST(ProductKernel, WorkedResidualIsPointMass) {
  const auto k = two_state();
  const auto cert = extract_minorization(k, {{0, 1}});
  const Eigen::VectorXd r0 = residual_row(k, cert, 0, 0, cert.epsilon());
  const Eigen::VectorXd r1 = residual_row(k, cert, 0, 1, cert.epsilon());
  EXPECT_NEAR(r0(0), 1.0, 1e-12);
  EXPECT_NEAR(r0(1), 0.0, 1e-12);
  EXPECT_NEAR(r1(0), 0.0, 1e-12);
  EXPECT_NEAR(r1(1), 1.0, 1e-12);
  const auto star = build_product_pstar(k, cert);
  EXPECT_NEAR(star.kernel()(star.index(0, 1), star.index(0, 1)), 1.0, 1e-12);
}

TEST(ProductKernel, OffSetRowIsTensorProduct) {
  const auto k = reflecting_walk();
  const auto star = build_product_pstar(k, extract_minorization(k, {{0, 1}}));
  const Eigen::MatrixXd joint = star.joint_row(2, 0);
  const Eigen::MatrixXd expected = k.row(2) * k.row(0).transpose();
  EXPECT_LT((joint - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ProductKernel, IdenticalRowsResidualIsRow) {
  const auto k = FiniteKernel::from_rows({{0.3, 0.7}, {0.3, 0.7}});
  const auto cert = extract_minorization(k, {{0, 1}}).with_epsilon(0.4);
  const Eigen::VectorXd r = residual_row(k, cert, 0, 0, 0.4);
  EXPECT_NEAR(r(0), 0.3, 1e-15);
  EXPECT_NEAR(r(1), 0.7, 1e-15);
}

TEST(ProductKernel, EpsilonOneIsDegenerate) {
  const auto k = FiniteKernel::from_rows({{0.3, 0.7}, {0.3, 0.7}});
  EXPECT_THROW(build_product_pstar(k, extract_minorization(k, {{0, 1}})), Degenerate);
}

TEST(ProductKernel, MarginalsAndResidualIdentity) {
  const auto k = reflecting_walk();
  const auto cert = extract_minorization(k, square_pairs({true, true, false}));
  const auto star = build_product_pstar(k, cert);
  const double eps = cert.epsilon();
  for (std::size_t x = 0; x < 3; ++x) {
    for (std::size_t xp = 0; xp < 3; ++xp) {
      const Eigen::MatrixXd j = star.joint_row(x, xp);
      if (!cert.contains(x, xp)) {
        EXPECT_LT((j.rowwise().sum() - k.row(x)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((j.colwise().sum().transpose() - k.row(xp)).cwiseAbs().maxCoeff(), 1e-15);
        continue;
      }
      const std::size_t slot = *cert.slot(x, xp);
      for (std::size_t which : {x, xp}) {
        const Eigen::VectorXd mix = (1.0 - eps) * residual_row(k, cert, slot, which, eps) + eps * cert.nu()[slot];
        EXPECT_LT((mix - k.row(which)).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
}

TEST(Homogeneous, ConstantsOnReflectingWalk) {
  const auto k = reflecting_walk();
  const WeightFunction v(vec({1, 2, 4}));
  const auto cert = extract_minorization(k, square_pairs({true, true, false}));
  const auto vbar = pair_average(v);
  EXPECT_DOUBLE_EQ(vbar[1 * 3 + 2], 3.0);
  const auto c = certify_homogeneous(k, cert, vbar);
  EXPECT_GT(c.lambda, 0.0);
  EXPECT_LT(c.lambda, 1.0);
  EXPECT_GE(c.B, 1.0);
  const auto star = build_product_pstar(k, cert);
  EXPECT_TRUE(drift_holds(star.kernel(), vbar, cert.product_mask(), c.lambda, c.b, 1e-12));
}

TEST(LevelSet, SelectsSublevel) {
  const auto s = level_set(WeightFunction(vec({1, 5, 2})), 2.0);
  EXPECT_EQ(s, (StateSet{true, false, true}));
  EXPECT_EQ(square_pairs(s).size(), 4u);
}

}  // namespace
}  // namespace mcbound
