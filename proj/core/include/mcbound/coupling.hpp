#pragma once

// The bell-variable coupling of two copies of a finite Markov chain.
//
// Given Z_n = (X_n, X'_n, d_n): if d_n = 1 both coordinates move together by
// one draw from P. If d_n = 0 and (X_n, X'_n) is in the coupling set, a coin
// with success probability eps decides between a common draw from
// nu_{X_n,X'_n} (and d_{n+1} = 1) and a draw from the residual pair kernel.
// Off the coupling set the pair moves by the joint kernel P̄, whose marginals
// are both P.
//
// The module also provides exact enumeration checks: the weighted path
// identity linking the bell chain to the P* chain, and exact marginal
// consistency of the construction.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mcbound/chain_model.hpp"
#include "mcbound/rng.hpp"

namespace mcbound::coupling {

/// Joint move of an uncoupled pair outside the coupling set.
enum class OffSetJoint {
  independent,  ///< P(x, .) ⊗ P(x', .)
  common_noise  ///< both coordinates inverted from the same uniform
};

struct CoupledState {
  std::size_t x = 0;
  std::size_t x_prime = 0;
  bool bell = false;

  friend bool operator==(const CoupledState&, const CoupledState&) = default;
};

/// Kernel, coupling set and coin probability for one time step, with the
/// cumulative tables the sampler needs.
class CouplingStep {
 public:
  /// `epsilon` defaults to the certificate's; a smaller value is allowed.
  CouplingStep(FiniteKernel kernel, MinorizationCertificate cert,
               std::optional<double> epsilon = std::nullopt);

  const FiniteKernel& kernel() const { return kernel_; }
  const MinorizationCertificate& certificate() const { return cert_; }
  double epsilon() const { return epsilon_; }
  /// eps = 1: every attempt on the coupling set succeeds; no residual kernel.
  bool immediate() const { return epsilon_ >= 1.0; }
  std::size_t size() const { return kernel_.size(); }

  std::span<const double> kernel_cdf(std::size_t x) const { return row_span(kernel_cdf_, x); }
  std::span<const double> nu_cdf(std::size_t slot) const { return row_span(nu_cdf_, slot); }
  /// side 0: residual of the first coordinate, side 1: of the second.
  std::span<const double> residual_cdf(std::size_t slot, std::size_t side) const {
    return row_span(residual_cdf_, 2 * slot + side);
  }

 private:
  std::span<const double> row_span(const std::vector<double>& table, std::size_t row) const {
    return {table.data() + row * kernel_.size(), kernel_.size()};
  }

  FiniteKernel kernel_;
  MinorizationCertificate cert_;
  double epsilon_;
  std::vector<double> kernel_cdf_;
  std::vector<double> nu_cdf_;
  std::vector<double> residual_cdf_;
};

struct CouplingConfig {
  /// Step k (1-based) uses steps[min(k, size) - 1]; a single entry is a homogeneous chain.
  std::vector<CouplingStep> steps;
  OffSetJoint joint = OffSetJoint::independent;
  std::uint64_t seed = 0;
  /// Worker threads for replica loops; 0 picks the hardware concurrency.
  unsigned threads = 0;

  const CouplingStep& step(std::size_t k) const;
  std::size_t size() const { return steps.empty() ? 0 : steps.front().size(); }
  void validate() const;
};

/// Convenience: a homogeneous configuration.
CouplingConfig homogeneous_config(const FiniteKernel& kernel, const MinorizationCertificate& cert,
                                  std::uint64_t seed, OffSetJoint joint = OffSetJoint::independent);

/// One transition of the coupled chain using the kernel of step k (k >= 1).
CoupledState coupled_step(const CoupledState& s, const CouplingConfig& cfg, std::size_t k, Stream& rng);

struct CouplingRunResult {
  std::size_t replicas = 0;
  std::size_t horizon = 0;
  /// time_counts[t] = #replicas with coupling time T = t, for t = 1..horizon (index 0 unused).
  std::vector<std::uint64_t> time_counts;
  /// #replicas with T > horizon.
  std::uint64_t uncoupled_at_horizon = 0;
  /// P̂(T > n) for n = 0..horizon.
  std::vector<double> p_uncoupled;
  /// Standard error of p_uncoupled (adjusted Wald, finite at p̂ = 0).
  std::vector<double> se;

  /// 2 P̂(T > n): estimated upper bound on ||xi P^n - xi' P^n||_TV.
  double tv_upper(std::size_t n) const { return 2.0 * p_uncoupled[n]; }
  /// Standard error of tv_upper(n).
  double tv_upper_se(std::size_t n) const { return 2.0 * se[n]; }

  friend bool operator==(const CouplingRunResult&, const CouplingRunResult&) = default;
};

/// Builds the statistics from per-replica coupling times (0 = not coupled by the horizon).
CouplingRunResult summarize_coupling_times(const std::vector<std::uint32_t>& times, std::size_t horizon);

/// m independent coupled trajectories from xi ⊗ xi' ⊗ delta_0, replica r on Stream(seed, r).
CouplingRunResult run_coupling(const CouplingConfig& cfg, const Measure& xi, const Measure& xi_prime,
                               std::size_t horizon, std::size_t replicas);

/// Endpoint samples (X_n, X'_n) of m coupled trajectories.
std::vector<CoupledState> simulate_endpoints(const CouplingConfig& cfg, const Measure& xi,
                                             const Measure& xi_prime, std::size_t n,
                                             std::size_t replicas);

// ---------------------------------------------------------------------------
// Exact enumeration

/// Transition matrix of Z restricted to the states reachable from d = 0:
/// indices [0, n^2) are uncoupled pairs x * n + x', [n^2, n^2 + n) coupled states.
/// Built directly from P, nu and eps (off the set: independent product).
Eigen::MatrixXd bell_chain_matrix(const CouplingStep& step);

using PairPath = std::span<const std::size_t>;
using PathFunctional = std::function<double(PairPath)>;

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_diff = 0.0;
};

/// Maximum number of pair paths an exact enumeration will visit.
inline constexpr std::size_t kMaxEnumeratedPaths = 10'000'000;

/// E[phi(X̄_0..X̄_n) 1(d_n = 0)] under the bell chain versus
/// E*[phi(X̄_0..X̄_n) prod_i (1 - eps_i 1_{C_i}(X̄_{i-1}))] under P*, by summing
/// over all pair paths. Steps are taken from cfg as in coupled_step.
IdentityCheck weighted_identity_check(const CouplingConfig& cfg, const Measure& xi,
                                      const Measure& xi_prime, std::size_t n,
                                      const PathFunctional& phi);

struct PathBasisReport {
  std::size_t paths = 0;
  double max_abs_diff = 0.0;
  /// Sums over all paths: P(d_n = 0) on both sides.
  double total_lhs = 0.0;
  double total_rhs = 0.0;
};

/// The identity for every single-path indicator phi = 1{path} at once.
PathBasisReport path_basis_identity_check(const CouplingConfig& cfg, const Measure& xi,
                                          const Measure& xi_prime, std::size_t n);

struct MarginalReport {
  double max_abs_diff_x = 0.0;
  double max_abs_diff_x_prime = 0.0;
};

/// Exact law of X_n and X'_n under the bell chain versus xi P_1..P_n and xi' P_1..P_n.
MarginalReport exact_marginal_check(const CouplingConfig& cfg, const Measure& xi,
                                    const Measure& xi_prime, std::size_t n);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Pearson goodness of fit of observed counts against expected probabilities.
/// Cells with expected count below 5 are pooled.
ChiSquareResult chi_square_gof(std::span<const std::uint64_t> counts, const Eigen::VectorXd& probs);

struct MonteCarloMarginalReport {
  ChiSquareResult x;
  ChiSquareResult x_prime;
  bool passed = false;
};

/// Empirical law of X_n, X'_n from `replicas` coupled runs against the exact
/// laws at significance `alpha`.
MonteCarloMarginalReport marginal_consistency_check(const CouplingConfig& cfg, const Measure& xi,
                                                    const Measure& xi_prime, std::size_t n,
                                                    std::size_t replicas, double alpha = 1e-3);

/// xi P_1 ... P_n using the kernels of cfg.
Measure propagate_steps(const CouplingConfig& cfg, const Measure& xi, std::size_t n);

}  // namespace mcbound::coupling
