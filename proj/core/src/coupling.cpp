#include "mcbound/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "mcbound/error.hpp"
#include "mcbound/parallel.hpp"

namespace mcbound::coupling {

using detail::reject;
using detail::require;

namespace {

void append_cdf(std::vector<double>& table, const Eigen::VectorXd& probs) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += std::max(probs(i), 0.0);
    table.push_back(acc);
  }
}

std::size_t draw_initial(const std::vector<double>& cdf, Stream& rng) { return rng.categorical(cdf); }

std::vector<double> measure_cdf(const Measure& m, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(m.size()) != n) {
    std::ostringstream msg;
    msg << what << " has dimension " << m.size() << ", expected " << n;
    reject(msg.str());
  }
  require((m.array() >= 0.0).all() && std::abs(m.sum() - 1.0) <= 1e-9,
          std::string(what) + " must be a probability vector");
  std::vector<double> cdf;
  append_cdf(cdf, m);
  return cdf;
}

// Inverse-CDF draw from a precomputed table with a caller-supplied uniform.
std::size_t invert(std::span<const double> cdf, double u) {
  const double target = u * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// CouplingStep

CouplingStep::CouplingStep(FiniteKernel kernel, MinorizationCertificate cert, std::optional<double> epsilon)
    : kernel_(std::move(kernel)), cert_(std::move(cert)), epsilon_(epsilon.value_or(cert_.epsilon())) {
  require(cert_.base_size() == kernel_.size(), "certificate and kernel disagree on the state count");
  require(epsilon_ >= 0.0 && epsilon_ <= cert_.epsilon() + kStochasticTolerance,
          "coupling epsilon must lie in [0, certificate epsilon]");
  validate_certificate(kernel_, cert_);
  const std::size_t n = kernel_.size();
  kernel_cdf_.reserve(n * n);
  for (std::size_t x = 0; x < n; ++x) append_cdf(kernel_cdf_, kernel_.row(x));
  for (std::size_t k = 0; k < cert_.pairs().size(); ++k) {
    append_cdf(nu_cdf_, cert_.nu()[k]);
    if (!immediate()) {
      const auto [x, xp] = cert_.pairs()[k];
      append_cdf(residual_cdf_, residual_row(kernel_, cert_, k, x, epsilon_));
      append_cdf(residual_cdf_, residual_row(kernel_, cert_, k, xp, epsilon_));
    }
  }
}

// ---------------------------------------------------------------------------
// CouplingConfig

const CouplingStep& CouplingConfig::step(std::size_t k) const {
  require(k >= 1, "step index k starts at 1");
  return steps[std::min(k, steps.size()) - 1];
}

void CouplingConfig::validate() const {
  require(!steps.empty(), "coupling configuration needs at least one step");
  for (const auto& s : steps) require(s.size() == size(), "all steps must share the state space");
}

CouplingConfig homogeneous_config(const FiniteKernel& kernel, const MinorizationCertificate& cert,
                                  std::uint64_t seed, OffSetJoint joint) {
  CouplingConfig cfg;
  cfg.steps.emplace_back(kernel, cert);
  cfg.joint = joint;
  cfg.seed = seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// Simulation

CoupledState coupled_step(const CoupledState& s, const CouplingConfig& cfg, std::size_t k, Stream& rng) {
  const CouplingStep& st = cfg.step(k);
  if (s.bell) {
    const std::size_t y = rng.categorical(st.kernel_cdf(s.x));
    return {y, y, true};
  }
  if (const auto slot = st.certificate().slot(s.x, s.x_prime)) {
    if (st.immediate() || rng.bernoulli(st.epsilon())) {
      const std::size_t y = rng.categorical(st.nu_cdf(*slot));
      return {y, y, true};
    }
    const std::size_t y = rng.categorical(st.residual_cdf(*slot, 0));
    const std::size_t yp = rng.categorical(st.residual_cdf(*slot, 1));
    return {y, yp, false};
  }
  if (cfg.joint == OffSetJoint::common_noise) {
    const double u = rng.uniform();
    return {invert(st.kernel_cdf(s.x), u), invert(st.kernel_cdf(s.x_prime), u), false};
  }
  const std::size_t y = rng.categorical(st.kernel_cdf(s.x));
  const std::size_t yp = rng.categorical(st.kernel_cdf(s.x_prime));
  return {y, yp, false};
}

namespace {

// Runs one replica to the horizon; returns its coupling time (0 when uncoupled).
template <typename Visitor>
void run_replica(const CouplingConfig& cfg, const std::vector<double>& xi_cdf,
                 const std::vector<double>& xip_cdf, std::size_t horizon, std::size_t r, Visitor&& visit) {
  Stream rng(cfg.seed, r);
  CoupledState s{draw_initial(xi_cdf, rng), draw_initial(xip_cdf, rng), false};
  for (std::size_t k = 1; k <= horizon; ++k) {
    s = coupled_step(s, cfg, k, rng);
    visit(k, s);
  }
}

}  // namespace

CouplingRunResult run_coupling(const CouplingConfig& cfg, const Measure& xi, const Measure& xi_prime,
                               std::size_t horizon, std::size_t replicas) {
  cfg.validate();
  require(replicas >= 1, "replica count must be >= 1");
  const auto xi_cdf = measure_cdf(xi, cfg.size(), "xi");
  const auto xip_cdf = measure_cdf(xi_prime, cfg.size(), "xi_prime");

  std::vector<std::uint32_t> times(replicas, 0);
  parallel_for(replicas, cfg.threads, [&](std::size_t r) {
    std::uint32_t t = 0;
    run_replica(cfg, xi_cdf, xip_cdf, horizon, r, [&](std::size_t k, const CoupledState& s) {
      if (t == 0 && s.bell) t = static_cast<std::uint32_t>(k);
    });
    times[r] = t;
  });

  return summarize_coupling_times(times, horizon);
}

CouplingRunResult summarize_coupling_times(const std::vector<std::uint32_t>& times, std::size_t horizon) {
  const std::size_t replicas = times.size();
  require(replicas >= 1, "replica count must be >= 1");
  CouplingRunResult out;
  out.replicas = replicas;
  out.horizon = horizon;
  out.time_counts.assign(horizon + 1, 0);
  for (std::uint32_t t : times) {
    if (t == 0) ++out.uncoupled_at_horizon; else ++out.time_counts[t];
  }
  const auto m = static_cast<double>(replicas);
  std::uint64_t still = replicas;
  out.p_uncoupled.resize(horizon + 1);
  out.se.resize(horizon + 1);
  for (std::size_t n = 0; n <= horizon; ++n) {
    if (n > 0) still -= out.time_counts[n];
    out.p_uncoupled[n] = static_cast<double>(still) / m;
    // Adjusted Wald: p̃ = (k + 2) / (m + 4), se = sqrt(p̃ (1 - p̃) / (m + 4)).
    const double pt = (static_cast<double>(still) + 2.0) / (m + 4.0);
    out.se[n] = std::sqrt(pt * (1.0 - pt) / (m + 4.0));
  }
  return out;
}

std::vector<CoupledState> simulate_endpoints(const CouplingConfig& cfg, const Measure& xi,
                                             const Measure& xi_prime, std::size_t n,
                                             std::size_t replicas) {
  cfg.validate();
  const auto xi_cdf = measure_cdf(xi, cfg.size(), "xi");
  const auto xip_cdf = measure_cdf(xi_prime, cfg.size(), "xi_prime");
  std::vector<CoupledState> out(replicas);
  parallel_for(replicas, cfg.threads, [&](std::size_t r) {
    if (n == 0) {
      Stream rng(cfg.seed, r);
      out[r] = {draw_initial(xi_cdf, rng), draw_initial(xip_cdf, rng), false};
      return;
    }
    run_replica(cfg, xi_cdf, xip_cdf, n, r, [&](std::size_t k, const CoupledState& s) {
      if (k == n) out[r] = s;
    });
  });
  return out;
}

// ---------------------------------------------------------------------------
// Exact enumeration

Eigen::MatrixXd bell_chain_matrix(const CouplingStep& step) {
  const std::size_t n = step.size();
  const auto& p = step.kernel().matrix();
  const double eps = step.epsilon();
  const auto total = static_cast<Eigen::Index>(n * n + n);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(total, total);
  const auto coupled = [n](std::size_t y) { return static_cast<Eigen::Index>(n * n + y); };
  const auto ix = [](std::size_t i) { return static_cast<Eigen::Index>(i); };

  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t xp = 0; xp < n; ++xp) {
      const auto from = ix(x * n + xp);
      if (const auto slot = step.certificate().slot(x, xp)) {
        const Eigen::VectorXd& nu = step.certificate().nu()[*slot];
        for (std::size_t y = 0; y < n; ++y) z(from, coupled(y)) = eps * nu(ix(y));
        if (eps < 1.0) {
          for (std::size_t y = 0; y < n; ++y)
            for (std::size_t yp = 0; yp < n; ++yp)
              z(from, ix(y * n + yp)) = (p(ix(x), ix(y)) - eps * nu(ix(y))) *
                                        (p(ix(xp), ix(yp)) - eps * nu(ix(yp))) / (1.0 - eps);
        }
      } else {
        for (std::size_t y = 0; y < n; ++y)
          for (std::size_t yp = 0; yp < n; ++yp) z(from, ix(y * n + yp)) = p(ix(x), ix(y)) * p(ix(xp), ix(yp));
      }
    }
  }
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t yn = 0; yn < n; ++yn) z(coupled(y), coupled(yn)) = p(ix(y), ix(yn));
  return z;
}

namespace {

struct EnumerationTables {
  std::size_t pairs = 0;
  std::vector<Eigen::MatrixXd> bell;     // per step k = 1..n
  std::vector<Eigen::MatrixXd> star;     // P*_k
  std::vector<StateSet> in_set;          // coupling set of step k over pair indices
  std::vector<double> eps;
  Eigen::VectorXd initial;               // xi ⊗ xi'
};

EnumerationTables make_tables(const CouplingConfig& cfg, const Measure& xi, const Measure& xi_prime,
                              std::size_t n) {
  cfg.validate();
  require(cfg.joint == OffSetJoint::independent,
          "exact enumeration supports the independent off-set joint only");
  const std::size_t base = cfg.size();
  require(static_cast<std::size_t>(xi.size()) == base && static_cast<std::size_t>(xi_prime.size()) == base,
          "initial laws must match the state space");
  EnumerationTables t;
  t.pairs = base * base;
  double count = 1.0;
  for (std::size_t i = 0; i <= n; ++i) count *= static_cast<double>(t.pairs);
  if (count > static_cast<double>(kMaxEnumeratedPaths)) {
    std::ostringstream msg;
    msg << "pair-path count " << count << " exceeds the enumeration limit " << kMaxEnumeratedPaths;
    reject(msg.str());
  }
  for (std::size_t k = 1; k <= n; ++k) {
    const CouplingStep& st = cfg.step(k);
    t.bell.push_back(bell_chain_matrix(st));
    t.in_set.push_back(st.certificate().product_mask());
    t.eps.push_back(st.epsilon());
    if (st.immediate()) {
      // P* is only consulted with weight 1 - eps = 0 on the coupling set; use P ⊗ P there.
      t.star.push_back(independent_product(st.kernel()).kernel().matrix());
    } else {
      t.star.push_back(build_product_pstar(st.kernel(), st.certificate(), st.epsilon()).kernel().matrix());
    }
  }
  t.initial.resize(static_cast<Eigen::Index>(t.pairs));
  for (std::size_t x = 0; x < base; ++x)
    for (std::size_t xp = 0; xp < base; ++xp)
      t.initial(static_cast<Eigen::Index>(x * base + xp)) =
          xi(static_cast<Eigen::Index>(x)) * xi_prime(static_cast<Eigen::Index>(xp));
  return t;
}

// Depth-first walk over all pair paths of length n + 1; visit(path, w_bell, w_star).
template <typename Visit>
void enumerate(const EnumerationTables& t, std::size_t n, Visit&& visit) {
  std::vector<std::size_t> path(n + 1);
  const auto rec = [&](auto&& self, std::size_t depth, double wl, double wr) -> void {
    if (depth == n + 1) {
      visit(PairPath(path), wl, wr);
      return;
    }
    const std::size_t prev = path[depth - 1];
    const auto& z = t.bell[depth - 1];
    const auto& star = t.star[depth - 1];
    const double discount = t.in_set[depth - 1][prev] ? 1.0 - t.eps[depth - 1] : 1.0;
    for (std::size_t p = 0; p < t.pairs; ++p) {
      path[depth] = p;
      const auto pi = static_cast<Eigen::Index>(prev), qi = static_cast<Eigen::Index>(p);
      self(self, depth + 1, wl * z(pi, qi), wr * star(pi, qi) * discount);
    }
  };
  for (std::size_t p0 = 0; p0 < t.pairs; ++p0) {
    path[0] = p0;
    const double w = t.initial(static_cast<Eigen::Index>(p0));
    rec(rec, 1, w, w);
  }
}

}  // namespace

IdentityCheck weighted_identity_check(const CouplingConfig& cfg, const Measure& xi, const Measure& xi_prime,
                                      std::size_t n, const PathFunctional& phi) {
  const auto t = make_tables(cfg, xi, xi_prime, n);
  IdentityCheck out;
  enumerate(t, n, [&](PairPath path, double wl, double wr) {
    if (wl == 0.0 && wr == 0.0) return;
    const double v = phi(path);
    out.lhs += wl * v;
    out.rhs += wr * v;
  });
  out.abs_diff = std::abs(out.lhs - out.rhs);
  return out;
}

PathBasisReport path_basis_identity_check(const CouplingConfig& cfg, const Measure& xi,
                                          const Measure& xi_prime, std::size_t n) {
  const auto t = make_tables(cfg, xi, xi_prime, n);
  PathBasisReport out;
  enumerate(t, n, [&](PairPath, double wl, double wr) {
    ++out.paths;
    out.max_abs_diff = std::max(out.max_abs_diff, std::abs(wl - wr));
    out.total_lhs += wl;
    out.total_rhs += wr;
  });
  return out;
}

Measure propagate_steps(const CouplingConfig& cfg, const Measure& xi, std::size_t n) {
  cfg.validate();
  Measure out = xi;
  for (std::size_t k = 1; k <= n; ++k) out = propagate(out, cfg.step(k).kernel(), 1);
  return out;
}

MarginalReport exact_marginal_check(const CouplingConfig& cfg, const Measure& xi, const Measure& xi_prime,
                                    std::size_t n) {
  cfg.validate();
  const std::size_t base = cfg.size();
  require(static_cast<std::size_t>(xi.size()) == base && static_cast<std::size_t>(xi_prime.size()) == base,
          "initial laws must match the state space");
  const auto total = static_cast<Eigen::Index>(base * base + base);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(total);
  for (std::size_t x = 0; x < base; ++x)
    for (std::size_t xp = 0; xp < base; ++xp)
      z(static_cast<Eigen::Index>(x * base + xp)) =
          xi(static_cast<Eigen::Index>(x)) * xi_prime(static_cast<Eigen::Index>(xp));
  for (std::size_t k = 1; k <= n; ++k) z = bell_chain_matrix(cfg.step(k)).transpose() * z;

  Eigen::VectorXd mx = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(base));
  Eigen::VectorXd mxp = mx;
  for (std::size_t x = 0; x < base; ++x) {
    for (std::size_t xp = 0; xp < base; ++xp) {
      const double w = z(static_cast<Eigen::Index>(x * base + xp));
      mx(static_cast<Eigen::Index>(x)) += w;
      mxp(static_cast<Eigen::Index>(xp)) += w;
    }
    const double c = z(static_cast<Eigen::Index>(base * base + x));
    mx(static_cast<Eigen::Index>(x)) += c;
    mxp(static_cast<Eigen::Index>(x)) += c;
  }
  MarginalReport out;
  out.max_abs_diff_x = (mx - propagate_steps(cfg, xi, n)).cwiseAbs().maxCoeff();
  out.max_abs_diff_x_prime = (mxp - propagate_steps(cfg, xi_prime, n)).cwiseAbs().maxCoeff();
  return out;
}

ChiSquareResult chi_square_gof(std::span<const std::uint64_t> counts, const Eigen::VectorXd& probs) {
  require(counts.size() == static_cast<std::size_t>(probs.size()), "counts and probabilities must align");
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  require(total > 0.0, "chi-square test needs at least one observation");

  double stat = 0.0;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = total * probs(static_cast<Eigen::Index>(i));
    const auto o = static_cast<double>(counts[i]);
    if (e < 5.0) {
      pooled_obs += o;
      pooled_exp += e;
      continue;
    }
    stat += (o - e) * (o - e) / e;
    ++cells;
  }
  if (pooled_exp > 0.0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  } else if (pooled_obs > 0.0) {
    // Observations where the exact law puts no mass.
    return {std::numeric_limits<double>::infinity(), static_cast<double>(cells), 0.0};
  }
  ChiSquareResult out;
  out.statistic = stat;
  out.dof = cells > 1 ? static_cast<double>(cells - 1) : 0.0;
  if (out.dof > 0.0) {
    boost::math::chi_squared dist(out.dof);
    out.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  } else {
    out.p_value = 1.0;
  }
  return out;
}

MonteCarloMarginalReport marginal_consistency_check(const CouplingConfig& cfg, const Measure& xi,
                                                    const Measure& xi_prime, std::size_t n,
                                                    std::size_t replicas, double alpha) {
  const auto ends = simulate_endpoints(cfg, xi, xi_prime, n, replicas);
  std::vector<std::uint64_t> cx(cfg.size(), 0), cxp(cfg.size(), 0);
  for (const auto& s : ends) {
    ++cx[s.x];
    ++cxp[s.x_prime];
  }
  MonteCarloMarginalReport out;
  out.x = chi_square_gof(cx, propagate_steps(cfg, xi, n));
  out.x_prime = chi_square_gof(cxp, propagate_steps(cfg, xi_prime, n));
  out.passed = out.x.p_value > alpha && out.x_prime.p_value > alpha;
  return out;
}

}  // namespace mcbound::coupling
