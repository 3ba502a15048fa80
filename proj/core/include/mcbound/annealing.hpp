#pragma once

// Random-walk Metropolis-Hastings on the real line targeting
// pi_gamma ∝ exp(-gamma f), the drift and minorization constants certified for
// it, the logarithmic cooling schedule, the annealing runner, and the
// temperature-shift bounds on ||pi_gamma - pi_gamma'||.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcbound/rng.hpp"

namespace mcbound::anneal {

/// Objective with derivatives and the tail growth constants:
/// f(y) - f(x) >= alpha (y - x) for y >= x >= x1, mirrored for y <= x <= -x1.
struct Objective {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;
  double alpha = 1.0;
  double x1 = 1.0;
  std::vector<double> minima;

  /// f(x) = x^2 / 2, alpha = 1, x1 = 1, minimum 0.
  static Objective quadratic();
  /// f(x) = (x^2 - 1)^2, alpha = 2, x1 = 1.2, minima -1 and 1.
  static Objective doublewell();
  /// "quadratic" or "doublewell".
  static Objective named(const std::string& name);

  /// Grid check of the growth condition and of f'' > 0 at each minimum.
  void validate() const;
  /// Global minimum value (over the declared minima, else a grid on [-x1, x1]).
  double f_min() const;
};

/// Symmetric proposal increment density.
struct Proposal {
  std::string name;
  std::function<double(double)> pdf;
  std::function<double(Stream&)> sample;
  /// Upper tail mass ∫_t^∞ q.
  std::function<double(double)> upper_tail;
  /// Half-width beyond which q carries negligible (< 1e-30) mass.
  double effective_halfwidth = 0.0;
  /// > 0 when q vanishes outside [-support, support].
  double compact_support = 0.0;

  static Proposal gaussian(double sigma = 1.0);
  /// Uniform on [-half_width, half_width].
  static Proposal uniform(double half_width);
  /// "gauss:sigma" or "uniform:h".
  static Proposal parse(const std::string& spec);

  /// Symmetry on a grid within 1e-10, positivity inside the support.
  void validate() const;
};

/// 1 ∧ exp(-gamma (f(y) - f(x))).
double accept_prob(const Objective& obj, double x, double y, double gamma);

/// One RWMH transition from x.
double rwmh_step(const Objective& obj, const Proposal& q, double x, double gamma, Stream& rng);

/// pi_gamma on the truncation [-A, A].
class TargetLaw {
 public:
  /// A is chosen from the exponential tail envelope so that the discarded mass is < tail_tol.
  TargetLaw(const Objective& obj, double gamma, double tail_tol = 1e-10);

  double gamma() const { return gamma_; }
  double half_width() const { return half_width_; }
  /// ∫ exp(-gamma (f - f_min)): the normalizer divided by sup exp(-gamma f).
  double Z() const { return Z_; }
  /// log ∫ exp(-gamma f).
  double log_Z_raw() const { return log_Z_raw_; }
  /// Upper bound on the mass discarded by the truncation.
  double tail_bound() const { return tail_bound_; }
  /// Number of times the truncation was enlarged after the first estimate.
  int enlargements() const { return enlargements_; }

  double density(double x) const;
  double mass(double a, double b) const;
  /// Knots for quadrature of expressions involving this density.
  const std::vector<double>& knots() const { return knots_; }

 private:
  Objective obj_;
  double gamma_;
  double f_min_;
  double half_width_ = 0.0;
  double Z_ = 0.0;
  double log_Z_raw_ = 0.0;
  double tail_bound_ = 0.0;
  int enlargements_ = 0;
  std::vector<double> knots_;
};

inline TargetLaw pi_gamma(const Objective& obj, double gamma) { return TargetLaw(obj, gamma); }

/// (pi K_gamma)(y) for the law pi: ∫ pi(x) alpha(x,y) q(y-x) dx + pi(y)(1 - ∫ alpha(y,z) q(z-y) dz).
double kernel_pushforward_density(const Objective& obj, const Proposal& q, const TargetLaw& pi, double y);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

/// sup_C f - inf_C f by a dense grid refined with Brent's method.
double oscillation(const Objective& obj, Interval c);

struct Minorization {
  Interval set;
  /// inf over x, y in C of q(y - x).
  double eps_q = 0.0;
  /// Oscillation of f on C.
  double d = 0.0;
  /// eps_q exp(-gamma d) |C|; nu is uniform on C.
  double eps_gamma = 0.0;
};

Minorization minorization_gamma(Interval c, double gamma, const Proposal& q, const Objective& obj);

/// 1 - t^(gamma/s) + t^((gamma-s)/s) with t = (gamma - s)/gamma; requires 0 < s < gamma.
double r_gamma_s(double gamma, double s);

/// u^-s (u^gamma ∧ 1) + 1 - (u^gamma ∧ 1).
double phi_gamma_s(double u, double gamma, double s);

/// K_gamma V_s(x) / V_s(x) with V_s = exp(s f), by quadrature over the proposal increment.
double kv_ratio(const Objective& obj, const Proposal& q, double x, double gamma, double s);

struct DriftConstants {
  double beta = 0.0;
  double eps_slack = 0.0;
  double M = 0.0;
  double s = 0.0;
  double x_underline = 0.0;
  double gamma_underline = 0.0;
  double lambda0 = 0.0;
  double lambda = 0.0;
  double b = 0.0;
  double c0 = 0.0;
  double c = 0.0;
  /// {V_s <= c}, an interval.
  Interval level_set;
  /// Oscillation of f on the level set.
  double d = 0.0;
};

/// Constants of the drift inequalities
///   K_gamma V_s <= lambda0 V_s + b 1{V_s <= c0}
///   K̄_gamma V̄_s <= lambda V̄_s + b 1{V_s <= c}^2
/// valid for every gamma >= gamma_underline. `lambda` defaults to (lambda0 + 1)/2.
DriftConstants derive_drift_constants(const Objective& obj, const Proposal& q, double beta,
                                      double lambda = -1.0);

struct DriftGridReport {
  /// Largest excess of K V_s / V_s over r(gamma, s) on x in [-20, 20], gamma in {2s, 4s, 10s}.
  double ratio_excess = 0.0;
  /// Largest excess over beta for |x| >= x_underline, gamma in [gamma_underline, 10 gamma_underline].
  double tail_excess = 0.0;
  /// Largest excess of the univariate inequality, relative to V_s.
  double univariate_excess = 0.0;
  /// Largest excess of the bivariate inequality, relative to V̄_s.
  double bivariate_excess = 0.0;
  std::size_t evaluations = 0;

  bool passed(double tol) const {
    return ratio_excess <= tol && tail_excess <= tol && univariate_excess <= tol &&
           bivariate_excess <= tol;
  }
};

DriftGridReport check_drift_constants(const Objective& obj, const Proposal& q, const DriftConstants& k);

struct CoolingSchedule {
  double d = 1.0;
  double xi = 0.0;
  double gamma_underline = 0.0;

  void validate() const;
};

/// log(i + 1) / (d (1 + xi)) + gamma_underline.
double cooling_gamma(std::size_t i, const CoolingSchedule& sched);

/// eps_{gamma_i} for the minorization of the level set: eps_q |C| exp(-gamma_i d).
double schedule_epsilon(std::size_t i, const CoolingSchedule& sched, const Minorization& m0);

struct AnnealConfig {
  CoolingSchedule schedule;
  /// When set, gamma_i = frozen_gamma for every i.
  double frozen_gamma = 0.0;
  bool frozen = false;
  std::size_t replicas = 1000;
  std::vector<std::size_t> checkpoints;
  /// Start at x0, or (start_from_target) at a draw from pi_{start_gamma}
  /// (inverse CDF tabulated on a fine grid).
  double x0 = 0.0;
  bool start_from_target = false;
  double start_gamma = 1.0;
  double bin_width = 0.05;
  /// Radius of the neighbourhood counted as "near a minimum".
  double near_radius = 0.25;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct Checkpoint {
  std::size_t n = 0;
  double gamma = 0.0;
  /// Bin edges are range_lo + k * bin_width.
  double range_lo = 0.0;
  double bin_width = 0.0;
  std::vector<std::uint64_t> counts;
  /// Samples outside the binned range.
  std::uint64_t outside = 0;
  /// sum_b |p̂_b - pi_b| including the outside cell (values in [0, 2]).
  double tv_estimate = 0.0;
  /// sum_b ∫_b |pi - pi_b / w|: the part of the TV invisible at this binning.
  double binning_bias = 0.0;
  /// Fraction of replicas within near_radius of each declared minimum, and of any.
  std::vector<double> mass_near;
  std::vector<double> mass_near_se;
  double mass_near_any = 0.0;
};

struct AnnealResult {
  std::vector<Checkpoint> checkpoints;
};

/// Replicated inhomogeneous RWMH chains with P_i = K_{gamma_i}, i = 1..max checkpoint.
AnnealResult run_annealing(const Objective& obj, const Proposal& q, const AnnealConfig& cfg);

struct ShiftBound {
  double bound = 0.0;
  double exact_tv = 0.0;
  /// (h/|h|)^gamma >= (h/|h|)^gamma' on the quadrature grid, h = exp(-f).
  bool hypothesis_holds = true;
};

/// 2 log(Z(gamma)/Z(gamma')) against ∫|pi_gamma - pi_gamma'|, for gamma' >= gamma > 0.
ShiftBound pi_shift_tv_bound(const Objective& obj, double gamma, double gamma_prime);

/// sqrt(2 pi / gamma) sum over minima of f''(x)^(-1/2).
double laplace_Z(const Objective& obj, double gamma);

}  // namespace mcbound::anneal
