#pragma once

// Verification suites: each checks one family of claims against exact
// finite-state oracles, quadrature or seeded Monte Carlo, and returns a plain
// report. The command-line selftest and the acceptance binary both run them.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcbound/chain_model.hpp"

namespace mcbound::verify {

struct SuiteReport {
  int id = 0;
  std::string title;
  bool passed = false;
  /// One line per violated check.
  std::vector<std::string> failures;
  /// Named summary numbers (worst slack, counts, estimates).
  std::vector<std::pair<std::string, double>> metrics;
  double seconds = 0.0;

  void metric(std::string name, double value) { metrics.emplace_back(std::move(name), value); }
  void fail(std::string what) { failures.push_back(std::move(what)); }
};

struct SuiteOptions {
  std::uint64_t seed = 20061001;
  /// Replicas for the Monte Carlo suites on finite chains and the AR model.
  std::size_t replicas = 100000;
  /// Replicas for the annealing run.
  std::size_t anneal_replicas = 10000;
  /// Random finite chains used by suites 1, 4, 5 and 7.
  std::size_t chain_count = 20;
  std::size_t max_states = 6;
  /// Horizon of the domination suite.
  std::size_t domination_horizon = 50;
  unsigned threads = 0;
};

/// A randomly generated finite chain together with its certified coupling constants.
struct FiniteInstance {
  std::uint64_t draw = 0;
  FiniteKernel kernel;
  WeightFunction v;
  /// Level set C = {V <= level}.
  double level = 0.0;
  StateSet set;
  MinorizationCertificate cert;
  WeightFunction vbar;
  HomogeneousConstants constants;
};

/// `count` certified chains with 3..max_states states drawn deterministically
/// from `seed`. C holds the 2..n-1 states of smallest V and rows favour low-V
/// states. A draw is kept when the chain is irreducible, 0 < eps < 1 and the
/// pair drift off C x C has lambda < 1.
std::vector<FiniteInstance> finite_instances(std::uint64_t seed, std::size_t count = 20,
                                             std::size_t max_states = 6);

SuiteReport finite_domination(const SuiteOptions& opt);        // 1
SuiteReport path_identity(const SuiteOptions& opt);            // 2
SuiteReport homogeneous_reduction(const SuiteOptions& opt);    // 3
SuiteReport rate_certification(const SuiteOptions& opt);       // 4
SuiteReport small_set_consistency(const SuiteOptions& opt);    // 5
SuiteReport autoregression(const SuiteOptions& opt);           // 6
SuiteReport coupling_validity(const SuiteOptions& opt);        // 7
SuiteReport annealing_constants(const SuiteOptions& opt);      // 8
SuiteReport laplace_and_shift(const SuiteOptions& opt);        // 9
SuiteReport annealing_convergence(const SuiteOptions& opt);    // 10

inline constexpr int kSuiteCount = 10;

/// Runs suite `id` (1..10) and records its wall time.
SuiteReport run_suite(int id, const SuiteOptions& opt);

}  // namespace mcbound::verify
