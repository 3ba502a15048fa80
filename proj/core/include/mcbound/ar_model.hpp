#pragma once

// Lipschitz autoregression X_{k+1} = g(X_k) + Z_k on the real line, with
// noise density q. The coupling set is C̄(delta) = {|x - x'| <= delta}; off the
// set the pair moves by common noise, on it by the minorization coin.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcbound/chain_model.hpp"
#include "mcbound/coupling.hpp"
#include "mcbound/rng.hpp"

namespace mcbound::ar {

/// Noise density with sampler and distribution function.
struct NoiseDensity {
  std::string name;
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
  std::function<double(Stream&)> sample;
  /// Symmetric about 0 and nonincreasing in |z|: the overlap of two shifted
  /// copies then depends only on the shift and decreases with it.
  bool symmetric_unimodal = true;
  /// Half-width of an interval holding all but a negligible (< 1e-16) amount of mass.
  double effective_halfwidth = 0.0;

  static NoiseDensity gaussian(double sigma);
  static NoiseDensity logistic(double scale);
  /// Piecewise-linear density through (x_i, p_i), normalised to mass 1.
  /// `symmetric_unimodal` is the caller's declaration.
  static NoiseDensity tabulated(std::vector<double> x, std::vector<double> p, bool symmetric_unimodal);
  /// "gauss:sigma" or "logistic:scale".
  static NoiseDensity parse(const std::string& spec);
};

/// Contraction map with its Lipschitz constant.
struct MapFunction {
  std::string name;
  std::function<double(double)> g;
  double lipschitz = 0.0;

  /// g(x) = a x.
  static MapFunction linear(double a);
  /// g(x) = tanh(a x).
  static MapFunction tanh(double a);
  /// "linear:a" or "tanh:a".
  static MapFunction parse(const std::string& spec);
};

struct ARModel {
  MapFunction g;
  NoiseDensity q;
  double delta = 1.0;
  double lambda = 0.9;

  double L() const { return g.lipschitz; }
  /// L < lambda < 1, delta > 0, q of unit mass.
  void validate() const;
  /// Throws unless delta > (1 - lambda) / (lambda - L).
  void require_bound_delta() const;
};

/// 1 - (1/2) ∫ |q(z - u) - q(z)| dz by adaptive quadrature.
double overlap_at_shift(const NoiseDensity& q, double u);

/// 2 F(-u/2), valid for symmetric unimodal q.
double overlap_closed_form(const NoiseDensity& q, double u);

struct EpsDeltaReport {
  double epsilon = 0.0;
  /// Closed form 2F(-L delta / 2); NaN when q is not declared symmetric unimodal.
  double closed_form = 0.0;
  double quadrature = 0.0;
  /// Shift at which the infimum of the overlap is attained.
  double worst_shift = 0.0;
};

/// eps(delta) = inf over |u| <= L delta of the overlap. For symmetric unimodal q
/// the infimum sits at u = L delta and quadrature is cross-checked against the
/// closed form at 1e-6; otherwise a grid of `grid_points` shifts is scanned.
EpsDeltaReport eps_delta_report(const ARModel& m, std::size_t grid_points = 10000);
double eps_delta(const ARModel& m);

/// B = 1 v ((1 + L delta - eps) / lambda).
double ar_B(const ARModel& m, double epsilon);

/// 2 (1 - eps)^j 1(j <= n) + 2 lambda^n B^(j-1) cross_moment.
double ar_bound(const ARModel& m, std::size_t n, std::size_t j, double cross_moment);
double ar_bound(const ARModel& m, double epsilon, std::size_t n, std::size_t j, double cross_moment);

struct ARState {
  double x = 0.0;
  double x_prime = 0.0;
  bool bell = false;
};

/// Model plus its precomputed eps(delta); the sampler for the coupled chain.
class ARCoupling {
 public:
  explicit ARCoupling(ARModel model);
  ARCoupling(ARModel model, double epsilon);

  const ARModel& model() const { return model_; }
  double epsilon() const { return epsilon_; }

  /// One plain AR transition.
  double step(double x, Stream& rng) const;
  ARState coupled_step(const ARState& s, Stream& rng) const;

 private:
  double sample_nu(double m1, double m2, Stream& rng) const;
  double sample_residual(double own, double other, double overlap, Stream& rng) const;

  ARModel model_;
  double epsilon_;
};

/// Accept-reject loops give up after this many proposals.
inline constexpr std::size_t kMaxAcceptReject = 1'000'000;

inline ARState ar_coupled_step(const ARState& s, const ARCoupling& c, Stream& rng) {
  return c.coupled_step(s, rng);
}

struct ARRunConfig {
  double x0 = 0.0;
  double x0_prime = 0.0;
  std::size_t horizon = 30;
  std::size_t replicas = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Coupling-time statistics of the coupled AR chain from (x0, x0').
coupling::CouplingRunResult run_ar_coupling(const ARCoupling& c, const ARRunConfig& cfg);

struct ThresholdLowerBound {
  /// For n = 0..horizon: max over thresholds t of 2(|P̂(X_n <= t) - P̂(X'_n <= t)| - 3 SE), floored at 0.
  std::vector<double> lower;
};

/// Monte Carlo lower bound on ||delta_x0 P^n - delta_x0' P^n||_TV from threshold
/// indicators, using the coupled chain's two marginals.
ThresholdLowerBound threshold_tv_lower_bound(const ARCoupling& c, const ARRunConfig& cfg,
                                             const std::vector<double>& thresholds);

/// Grid discretization: row i puts mass ∝ q(y_j - g(x_i)) on grid point y_j.
FiniteKernel discretize(const ARModel& m, double lo, double hi, std::size_t points);

/// Point mass on the grid point nearest to x.
Measure grid_point_mass(double lo, double hi, std::size_t points, double x);

}  // namespace mcbound::ar
