#pragma once

// Finite-state Markov kernels and the exact oracles built on them: measure
// propagation, weighted norms, stationary laws, and extraction/verification of
// the minorization (coupling set) and drift constants.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mcbound {

/// Signed measure on a finite state space, one mass per state.
using Measure = Eigen::VectorXd;

/// Membership mask over the states of a kernel.
using StateSet = std::vector<bool>;

using StatePair = std::pair<std::size_t, std::size_t>;

inline constexpr double kStochasticTolerance = 1e-12;

/// Row-stochastic transition matrix over a labelled finite state space.
class FiniteKernel {
 public:
  FiniteKernel(std::vector<std::string> states, Eigen::MatrixXd rows);
  /// States labelled "0", "1", ...
  explicit FiniteKernel(Eigen::MatrixXd rows);

  static FiniteKernel from_rows(const std::vector<std::vector<double>>& rows,
                                std::vector<std::string> states = {});

  std::size_t size() const { return states_.size(); }
  const std::vector<std::string>& states() const { return states_; }
  const Eigen::MatrixXd& matrix() const { return rows_; }
  double operator()(std::size_t x, std::size_t y) const { return rows_(x, y); }
  Eigen::VectorXd row(std::size_t x) const { return rows_.row(x).transpose(); }

  /// (K h)(x) = sum_y K(x, y) h(y).
  Eigen::VectorXd apply(const Eigen::VectorXd& h) const;

 private:
  std::vector<std::string> states_;
  Eigen::MatrixXd rows_;
};

/// Weight function f with f(x) >= 1 everywhere.
class WeightFunction {
 public:
  explicit WeightFunction(Eigen::VectorXd values);
  static WeightFunction constant(std::size_t n, double value = 1.0);

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t x) const { return values_(static_cast<Eigen::Index>(x)); }

 private:
  Eigen::VectorXd values_;
};

/// Kernel on X x X. Pair (x, x') has index x * n + x'.
class ProductKernel {
 public:
  ProductKernel(std::size_t base_size, FiniteKernel kernel);

  std::size_t base_size() const { return base_; }
  std::size_t index(std::size_t x, std::size_t xp) const { return x * base_ + xp; }
  StatePair pair(std::size_t idx) const { return {idx / base_, idx % base_}; }
  const FiniteKernel& kernel() const { return kernel_; }

  /// Row of the pair kernel reshaped as an n x n matrix (row = first coordinate).
  Eigen::MatrixXd joint_row(std::size_t x, std::size_t xp) const;

 private:
  std::size_t base_;
  FiniteKernel kernel_;
};

/// Coupling set with its per-pair minorizing measures:
/// P(x, .) ^ P(x', .) >= epsilon * nu_{x,x'} for every listed pair.
class MinorizationCertificate {
 public:
  MinorizationCertificate(std::size_t base_size, std::vector<StatePair> pairs,
                          std::vector<Eigen::VectorXd> nu, double epsilon);

  std::size_t base_size() const { return base_; }
  const std::vector<StatePair>& pairs() const { return pairs_; }
  const std::vector<Eigen::VectorXd>& nu() const { return nu_; }
  double epsilon() const { return epsilon_; }
  /// True when some listed pair has zero overlap (epsilon == 0).
  bool degenerate() const { return epsilon_ <= 0.0; }

  /// Slot of the pair in pairs()/nu(), if it belongs to the coupling set.
  std::optional<std::size_t> slot(std::size_t x, std::size_t xp) const;
  bool contains(std::size_t x, std::size_t xp) const { return slot(x, xp).has_value(); }

  /// Membership mask over product indices x * n + x'.
  StateSet product_mask() const;

  /// Same pairs and measures, smaller epsilon (a weaker but valid certificate).
  MinorizationCertificate with_epsilon(double epsilon) const;

 private:
  std::size_t base_;
  std::vector<StatePair> pairs_;
  std::vector<Eigen::VectorXd> nu_;
  double epsilon_;
  std::vector<long> slot_of_;
};

/// Outcome of the pointwise drift maximisation.
struct DriftCheck {
  double lambda_min = 0.0;
  double b_min = 0.0;
  /// lambda_min >= 1: no geometric drift off the set.
  bool violation = false;
  /// The set is the whole space; lambda is unconstrained and reported as 0.
  bool vacuous = false;
};

/// Drift certificate K vbar <= lambda vbar + b 1_C.
struct DriftCertificate {
  WeightFunction vbar;
  double lambda;
  double b;
  StateSet set;

  bool holds(const FiniteKernel& kernel, double tol = kStochasticTolerance) const;
};

/// xi P^n by n successive vector-matrix products.
Measure propagate(const Measure& xi, const FiniteKernel& kernel, std::size_t n);

/// sup_{|phi| <= f} |mu(phi)| = sum_x f(x) |mu(x)|.
double f_norm(const Measure& mu, const WeightFunction& f);

/// Total variation norm sum_x |mu(x)| (values in [0, 2] for differences of laws).
double tv_norm(const Measure& mu);

bool is_irreducible(const FiniteKernel& kernel);

/// Unique stationary law of an irreducible kernel; throws Degenerate otherwise.
Measure stationary(const FiniteKernel& kernel);

/// Per-pair overlap sum_y P(x,y) ^ P(x',y) with nu = normalised componentwise minimum.
/// epsilon is the minimum overlap; a zero overlap yields a degenerate certificate.
MinorizationCertificate extract_minorization(const FiniteKernel& kernel,
                                             const std::vector<StatePair>& pairs);

/// Small-set certificate for C x C with the common measure nu(y) ∝ min_{x in C} P(x, y).
MinorizationCertificate small_set_certificate(const FiniteKernel& kernel, const StateSet& set);

/// Throws InvalidInput when the certificate does not minorize the kernel.
void validate_certificate(const FiniteKernel& kernel, const MinorizationCertificate& cert,
                          double tol = kStochasticTolerance);

DriftCheck verify_drift(const FiniteKernel& kernel, const WeightFunction& v, const StateSet& set);

/// Smallest b >= 0 making K v <= lambda v + b 1_C hold on C.
double drift_b_for(const FiniteKernel& kernel, const WeightFunction& v, const StateSet& set,
                   double lambda);

/// Pointwise check of K v <= lambda v + b 1_C (b may be negative).
bool drift_holds(const FiniteKernel& kernel, const WeightFunction& v, const StateSet& set,
                 double lambda, double b, double tol);

/// Residual row R_{x,x'}(which, .) = (P(which, .) - eps nu_{x,x'}) / (1 - eps).
Eigen::VectorXd residual_row(const FiniteKernel& kernel, const MinorizationCertificate& cert,
                             std::size_t slot, std::size_t which, double epsilon);

/// P*: independent product P ⊗ P off the coupling set, R ⊗ R on it.
ProductKernel build_product_pstar(const FiniteKernel& kernel, const MinorizationCertificate& cert);

/// Same construction with an explicit epsilon <= cert.epsilon().
ProductKernel build_product_pstar(const FiniteKernel& kernel, const MinorizationCertificate& cert,
                                  double epsilon);

/// P ⊗ P on every pair.
ProductKernel independent_product(const FiniteKernel& kernel);

/// vbar(x, x') = (v(x) + v(x')) / 2 on product indices.
WeightFunction pair_average(const WeightFunction& v);

/// Level set {x : v(x) <= level}.
StateSet level_set(const WeightFunction& v, double level);

/// Pairs of C x C in row-major order.
std::vector<StatePair> square_pairs(const StateSet& set);

/// Constants of the homogeneous coupling bound certified on a finite chain.
struct HomogeneousConstants {
  double epsilon = 0.0;
  double lambda = 0.0;
  double b = 0.0;
  double B = 1.0;
  /// max over the coupling set of R̄ V̄.
  double sup_residual_v = 0.0;
  /// max over the coupling set of P̄ V̄, where P̄ = (1 - eps) R̄ + eps nu on the diagonal.
  double M = 0.0;
  bool vacuous = false;
};

/// Builds P*, maximises the drift ratio of vbar off the coupling set and
/// computes B = 1 v ((1 - eps) / lambda * max R̄ V̄). If the coupling set covers
/// every pair, `vacuous_lambda` is used as lambda. Throws Degenerate when the
/// drift ratio is >= 1 or the certificate is degenerate.
HomogeneousConstants certify_homogeneous(const FiniteKernel& kernel,
                                         const MinorizationCertificate& cert,
                                         const WeightFunction& vbar,
                                         double vacuous_lambda = 0.5);

}  // namespace mcbound
