#include "mcbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "mcbound/error.hpp"

namespace mcbound::bounds {

using detail::reject;
using detail::require;

namespace {

// Powers and products switch to log space past these thresholds.
constexpr std::size_t kLogSpaceSteps = 200;
constexpr double kLogSpaceB = 10.0;

bool log_space(std::size_t n, double B) { return n > kLogSpaceSteps || B > kLogSpaceB; }

void check_j(std::size_t n, std::size_t j) {
  if (n < 1) reject("n must be >= 1");
  if (j < 1 || j > n + 1) {
    std::ostringstream msg;
    msg << "j = " << j << " must lie in {1, ..., n+1} = {1, ..., " << n + 1 << "}";
    reject(msg.str());
  }
}

// 2 lambda^n B^(j-1) v0
double tail_term(double lambda, double B, double v0, std::size_t n, std::size_t j) {
  if (log_space(n, B)) {
    return 2.0 * std::exp(static_cast<double>(n) * std::log(lambda) +
                          static_cast<double>(j - 1) * std::log(B) + std::log(v0));
  }
  return 2.0 * std::pow(lambda, static_cast<double>(n)) * std::pow(B, static_cast<double>(j - 1)) * v0;
}

double one_minus_eps_pow(double eps, std::size_t j) {
  return std::pow(1.0 - eps, static_cast<double>(j));
}

// Largest product of j values, in log space. Values must be >= 0.
double log_extremal(std::vector<double> values, std::size_t j) {
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(j), values.end(),
                    std::greater<>());
  double acc = 0.0;
  for (std::size_t i = 0; i < j; ++i) acc += std::log(values[i]);
  return acc;
}

}  // namespace

void HomogeneousBoundInput::validate() const {
  require(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0,1]");
  require(lambda > 0.0 && lambda < 1.0, "lambda must lie in (0,1)");
  require(b >= 0.0 && std::isfinite(b), "b must be >= 0");
  require(B >= 1.0 && std::isfinite(B), "B must be >= 1");
  require(v0 >= 1.0 && std::isfinite(v0), "v0 must be >= 1");
}

void SConditionInput::validate() const {
  require(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0,1]");
  require(lambda_c > 0.0 && lambda_c < 1.0, "lambda_c must lie in (0,1)");
  require(b_c >= 0.0, "b_c must be >= 0");
  require(c >= 1.0, "c must be >= 1");
  require(xi_v >= 1.0 && xi_prime_v >= 1.0, "xi(V) and xi'(V) must be >= 1");
  require(lambda_c + b_c / (1.0 + c) < 1.0, "condition (S) violated: lambda_c + b_c/(1+c) must be < 1");
}

void InhomogeneousSchedule::validate() const {
  const std::size_t n = eps.size();
  require(n > 0, "schedule must be nonempty");
  require(lambda.size() == n && b.size() == n && B.size() == n,
          "schedule sequences eps, lambda, b, B must have the same length");
  for (std::size_t k = 0; k < n; ++k) {
    require(eps[k] >= 0.0 && eps[k] <= 1.0, "eps_k must lie in [0,1]");
    require(lambda[k] >= 0.0 && lambda[k] <= 1.0, "lambda_k must lie in [0,1]");
    require(b[k] >= 0.0, "b_k must be >= 0");
    require(B[k] >= 1.0, "B_k must be >= 1");
  }
  require(v0 >= 1.0, "v0 must be >= 1");
}

InhomogeneousSchedule InhomogeneousSchedule::constant(const HomogeneousBoundInput& in, std::size_t n) {
  return {std::vector<double>(n, in.epsilon), std::vector<double>(n, in.lambda),
          std::vector<double>(n, in.b), std::vector<double>(n, in.B), in.v0};
}

// ---------------------------------------------------------------------------
// Homogeneous

double bound_tv_homog(const HomogeneousBoundInput& in, std::size_t n, std::size_t j) {
  in.validate();
  check_j(n, j);
  const double head = j <= n ? 2.0 * one_minus_eps_pow(in.epsilon, j) : 0.0;
  return head + tail_term(in.lambda, in.B, in.v0, n, j);
}

double bound_f_homog(const HomogeneousBoundInput& in, std::size_t n, std::size_t j) {
  in.validate();
  check_j(n, j);
  double head = 0.0;
  if (j <= n) {
    const double lam_n = log_space(n, in.B) ? std::exp(static_cast<double>(n) * std::log(in.lambda))
                                            : std::pow(in.lambda, static_cast<double>(n));
    head = 2.0 * one_minus_eps_pow(in.epsilon, j) * (in.b / (1.0 - in.lambda) + lam_n * in.v0);
  }
  return head + tail_term(in.lambda, in.B, in.v0, n, j);
}

Optimum optimize_j(const HomogeneousBoundInput& in, std::size_t n, Norm which) {
  in.validate();
  if (n < 1) reject("n must be >= 1");
  Optimum best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t j = 1; j <= n + 1; ++j) {
    const double v = which == Norm::tv ? bound_tv_homog(in, n, j) : bound_f_homog(in, n, j);
    if (v < best.value) best = {j, v};
  }
  return best;
}

BoundCurve bound_curve(const HomogeneousBoundInput& in, std::size_t n_first, std::size_t n_last) {
  require(n_first >= 1 && n_first <= n_last, "curve range must satisfy 1 <= n_first <= n_last");
  BoundCurve out;
  out.reserve(n_last - n_first + 1);
  for (std::size_t n = n_first; n <= n_last; ++n) {
    const auto tv = optimize_j(in, n, Norm::tv);
    const auto f = optimize_j(in, n, Norm::f);
    out.push_back({n, tv.j_star, tv.value, f.j_star, f.value});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rates and the small-set translation

std::size_t RateBound::witness_j(std::size_t n) const {
  if (!mixed_branch) return n + 1;
  const auto j = static_cast<std::size_t>(std::floor(j_slope * static_cast<double>(n)));
  return std::clamp<std::size_t>(j, 1, n);
}

RateBound rate_bound(double epsilon, double lambda, double M) {
  require(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0,1]");
  require(lambda > 0.0 && lambda < 1.0, "lambda must lie in (0,1)");
  require(M >= epsilon, "M must be >= epsilon");
  const double ratio = (M - epsilon) / lambda;
  if (ratio < 1.0) return {std::log(lambda), false, 0.0};
  if (epsilon >= 1.0) return {std::log(lambda), true, 0.0};
  const double denom = std::log(ratio) - std::log1p(-epsilon);
  return {-std::log(lambda) * std::log1p(-epsilon) / denom, true, -std::log(lambda) / denom};
}

SParams derive_s_params(double lambda_c, double b_c, double c, double epsilon) {
  require(epsilon >= 0.0 && epsilon < 1.0, "epsilon must lie in [0,1)");
  require(lambda_c >= 0.0 && b_c >= 0.0 && c >= 0.0, "lambda_c, b_c and c must be nonnegative");
  if (!(lambda_c + b_c / (1.0 + c) < 1.0))
    reject("condition (S) violated: lambda_c + b_c/(1+c) must be < 1");
  const double lambda = lambda_c + b_c / (1.0 + c);
  const double b = std::max(c * epsilon * lambda_c / (1.0 - epsilon) - c * b_c / (1.0 + c), 0.0) +
                   (b_c - epsilon) / (1.0 - epsilon);
  return {lambda, b};
}

SmallSetBoundResult small_set_bounds(const SConditionInput& in, std::size_t n, std::size_t j) {
  in.validate();
  check_j(n, j);
  const auto [lambda, b] = derive_s_params(in.lambda_c, in.b_c, in.c, in.epsilon);
  SmallSetBoundResult out{};
  out.lambda = lambda;
  out.b = b;
  if (out.b < 0.0) {
    out.b = 0.0;
    out.b_clamped = true;
  }
  out.sup_rv = in.has_sup_rv ? in.sup_rv
                             : (in.lambda_c * in.c + in.b_c - in.epsilon) / (1.0 - in.epsilon);
  if (out.sup_rv < 0.0) {
    out.sup_rv = 0.0;
    out.sup_rv_clamped = true;
  }
  out.B = std::max(1.0, (1.0 - in.epsilon) / lambda * out.sup_rv);
  const HomogeneousBoundInput hom{in.epsilon, lambda, out.b, out.B, 0.5 * (in.xi_v + in.xi_prime_v)};
  out.tv_bound = bound_tv_homog(hom, n, j);
  out.f_bound = bound_f_homog(hom, n, j);
  return out;
}

// ---------------------------------------------------------------------------
// Time-inhomogeneous

double extremal_subset_product(std::span<const double> values, std::size_t j) {
  if (j > values.size()) reject("subset size j exceeds the number of values");
  for (double v : values) require(v >= 0.0, "extremal products need nonnegative values");
  if (j == 0) return 1.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(j), sorted.end(),
                    std::greater<>());
  double p = 1.0;
  for (std::size_t i = 0; i < j; ++i) p *= sorted[i];
  return p;
}

double d_sequence(const InhomogeneousSchedule& s, std::size_t n) {
  require(n <= s.size(), "schedule is shorter than n");
  double d = s.v0;
  for (std::size_t k = 0; k < n; ++k) d = s.lambda[k] * d + s.b[k];
  return d;
}

double bound_inhom(const InhomogeneousSchedule& s, std::size_t n, std::size_t j, Norm which) {
  s.validate();
  check_j(n, j);
  require(s.size() >= n, "schedule is shorter than n");

  const auto first = [n](const std::vector<double>& v) {
    return std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
  };
  std::vector<double> survive = first(s.eps);
  for (double& e : survive) e = 1.0 - e;
  const std::vector<double> bs = first(s.B);
  const double max_b = *std::max_element(bs.begin(), bs.end());

  double head = 0.0, tail = 0.0;
  if (log_space(n, max_b)) {
    double log_lam = 0.0;
    for (std::size_t k = 0; k < n; ++k) log_lam += std::log(s.lambda[k]);
    tail = 2.0 * std::exp(log_lam + log_extremal(bs, j - 1) + std::log(s.v0));
    if (j <= n) head = 2.0 * std::exp(log_extremal(survive, j));
  } else {
    double lam = 1.0;
    for (std::size_t k = 0; k < n; ++k) lam *= s.lambda[k];
    tail = 2.0 * lam * extremal_subset_product(bs, j - 1) * s.v0;
    if (j <= n) head = 2.0 * extremal_subset_product(survive, j);
  }
  if (which == Norm::f) head *= d_sequence(s, n);
  return head + tail;
}

Optimum optimize_j_inhom(const InhomogeneousSchedule& s, std::size_t n, Norm which) {
  if (n < 1) reject("n must be >= 1");
  Optimum best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t j = 1; j <= n + 1; ++j) {
    const double v = bound_inhom(s, n, j, which);
    if (v < best.value) best = {j, v};
  }
  return best;
}

}  // namespace mcbound::bounds
