#pragma once

// Explicit coupling bounds on ||xi P^n - xi' P^n|| in total variation and in
// the weighted f-norm, for time-homogeneous and time-inhomogeneous chains.
//
// Total variation follows the sup_{|phi| <= 1} convention, so differences of
// probability laws take values in [0, 2]. Every bound is returned raw (never
// clamped); clamp_tv() applies the trivial bound 2 on request.

#include <cstddef>
#include <span>
#include <vector>

namespace mcbound::bounds {

enum class Norm { tv, f };

/// Constants of the homogeneous bound.
struct HomogeneousBoundInput {
  double epsilon;  ///< minorization constant, in (0, 1]
  double lambda;   ///< drift rate, in (0, 1)
  double b;        ///< drift offset, >= 0
  double B;        ///< >= 1
  double v0;       ///< (xi ⊗ xi')(V̄), >= 1

  void validate() const;
};

/// Constants of the univariate small-set condition
/// P V <= lambda_c V + b_c 1_C on C = {V <= c} with lambda_c + b_c / (1 + c) < 1.
struct SConditionInput {
  double epsilon;
  double lambda_c;
  double b_c;
  double c;
  double xi_v;        ///< xi(V)
  double xi_prime_v;  ///< xi'(V)
  /// sup over C of R V; when absent the surrogate (lambda_c c + b_c - eps) / (1 - eps) is used.
  double sup_rv = -1.0;
  bool has_sup_rv = false;

  void validate() const;
};

/// Per-step constants of the time-inhomogeneous bound. All sequences have the
/// same length N. eps[k] and B[k] belong to step k + 1 (the kernel P_{k+1});
/// lambda[k] and b[k] to the drift inequality indexed k.
struct InhomogeneousSchedule {
  std::vector<double> eps;
  std::vector<double> lambda;
  std::vector<double> b;
  std::vector<double> B;
  double v0 = 1.0;

  std::size_t size() const { return eps.size(); }
  void validate() const;
  static InhomogeneousSchedule constant(const HomogeneousBoundInput& in, std::size_t n);
};

struct CurvePoint {
  std::size_t n;
  std::size_t j_star_tv;
  double tv_bound;
  std::size_t j_star_f;
  double f_bound;
};

using BoundCurve = std::vector<CurvePoint>;

struct Optimum {
  std::size_t j_star;
  double value;
};

/// 2(1-eps)^j 1(j<=n) + 2 lambda^n B^(j-1) v0, for j in {1..n+1}.
double bound_tv_homog(const HomogeneousBoundInput& in, std::size_t n, std::size_t j);

/// 2(1-eps)^j (b/(1-lambda) + lambda^n v0) 1(j<=n) + 2 lambda^n B^(j-1) v0.
double bound_f_homog(const HomogeneousBoundInput& in, std::size_t n, std::size_t j);

/// Exhaustive scan over j = 1..n+1; smallest j wins ties.
Optimum optimize_j(const HomogeneousBoundInput& in, std::size_t n, Norm which);

/// Curve over n = n_first..n_last of the j-optimised bounds.
BoundCurve bound_curve(const HomogeneousBoundInput& in, std::size_t n_first, std::size_t n_last);

struct RateBound {
  double rate;
  /// True for the (M - eps)/lambda >= 1 branch.
  bool mixed_branch;
  /// j(n) = floor(j_slope * n) is the index choice witnessing the rate.
  double j_slope;

  std::size_t witness_j(std::size_t n) const;
};

/// Asymptotic rate limsup (1/n) log ||P^n(x,.) - pi||_f implied by the
/// homogeneous bound, with M = sup over the coupling set of P̄ V̄.
RateBound rate_bound(double epsilon, double lambda, double M);

struct SParams {
  double lambda;
  double b;
};

/// Pair drift constants for V̄ = (V + V')/2 derived from the small-set condition.
SParams derive_s_params(double lambda_c, double b_c, double c, double epsilon);

struct SmallSetBoundResult {
  double tv_bound;
  double f_bound;
  double lambda;
  double b;
  double B;
  double sup_rv;
  /// The surrogate for sup_C RV was negative and clamped at 0.
  bool sup_rv_clamped = false;
  /// The derived b was negative and clamped at 0.
  bool b_clamped = false;
};

SmallSetBoundResult small_set_bounds(const SConditionInput& in, std::size_t n, std::size_t j);

/// Largest product over all j-element subsets of nonnegative values; 1 for j = 0.
double extremal_subset_product(std::span<const double> values, std::size_t j);

/// D_n by the recurrence D_0 = v0, D_{k+1} = lambda_k D_k + b_k.
double d_sequence(const InhomogeneousSchedule& s, std::size_t n);

/// Time-inhomogeneous bound for j in {1..n+1}; uses the first n schedule entries.
double bound_inhom(const InhomogeneousSchedule& s, std::size_t n, std::size_t j, Norm which);

Optimum optimize_j_inhom(const InhomogeneousSchedule& s, std::size_t n, Norm which);

/// min(value, 2): total variation never exceeds 2.
inline double clamp_tv(double value) { return value < 2.0 ? value : 2.0; }

}  // namespace mcbound::bounds
