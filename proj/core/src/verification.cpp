#include "mcbound/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mcbound/annealing.hpp"
#include "mcbound/ar_model.hpp"
#include "mcbound/bounds.hpp"
#include "mcbound/coupling.hpp"
#include "mcbound/error.hpp"
#include "mcbound/rng.hpp"

namespace mcbound::verify {

namespace {

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << args);
  return os.str();
}

SuiteReport start(int id, std::string title) {
  SuiteReport r;
  r.id = id;
  r.title = std::move(title);
  return r;
}

SuiteReport finish(SuiteReport r) {
  r.passed = r.failures.empty();
  return r;
}

// Keeps at most this many failure lines per suite; the rest are counted.
constexpr std::size_t kMaxFailureLines = 20;

void record(SuiteReport& r, std::size_t& violations, const std::string& what) {
  ++violations;
  if (violations <= kMaxFailureLines) r.fail(what);
}

Eigen::VectorXd random_law(std::size_t n, Stream& rng) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  for (auto& v : p) v = 0.05 + rng.uniform();
  return p / p.sum();
}

Eigen::MatrixXd random_kernel(std::size_t n, Stream& rng) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index x = 0; x < p.rows(); ++x) p.row(x) = random_law(n, rng).transpose();
  return p;
}

Measure point_mass(std::size_t n, std::size_t x) {
  Measure m = Measure::Zero(static_cast<Eigen::Index>(n));
  m(static_cast<Eigen::Index>(x)) = 1.0;
  return m;
}

double pair_moment(const Measure& xi, const Measure& xi_prime, const WeightFunction& vbar) {
  const auto n = xi.size();
  double acc = 0.0;
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) acc += xi(x) * xi_prime(y) * vbar[static_cast<std::size_t>(x * n + y)];
  return acc;
}

struct LawPair {
  Measure xi;
  Measure xi_prime;
};

// Every ordered pair of distinct point masses plus one random pair of laws.
std::vector<LawPair> initial_pairs(const FiniteInstance& inst, std::uint64_t seed) {
  const std::size_t n = inst.kernel.size();
  std::vector<LawPair> out;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (x != y) out.push_back({point_mass(n, x), point_mass(n, y)});
  Stream rng(seed, inst.draw ^ 0xA5A5A5A5ULL);
  out.push_back({random_law(n, rng), random_law(n, rng)});
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Random certified chains

std::vector<FiniteInstance> finite_instances(std::uint64_t seed, std::size_t count, std::size_t max_states) {
  detail::require(max_states >= 3, "max_states must be >= 3");
  std::vector<FiniteInstance> out;
  constexpr std::uint64_t kMaxDraws = 100000;
  for (std::uint64_t draw = 0; draw < kMaxDraws && out.size() < count; ++draw) {
    Stream rng(seed, draw);
    const std::size_t n =
        3 + std::min<std::size_t>(max_states - 3, static_cast<std::size_t>(rng.uniform() * double(max_states - 2)));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (auto& e : v) {
      const double u = rng.uniform();
      e = 1.0 + 9.0 * u * u;
    }
    Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index x = 0; x < p.rows(); ++x) {
      for (Eigen::Index y = 0; y < p.cols(); ++y) p(x, y) = (0.05 + rng.uniform()) * std::exp(-0.3 * (v(y) - 1.0));
      p.row(x) /= p.row(x).sum();
    }
    const std::size_t k = 2 + std::min<std::size_t>(n - 3, static_cast<std::size_t>(rng.uniform() * double(n - 2)));
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    const double level = sorted[k - 1];
    if (k < n && sorted[k] == level) continue;

    try {
      FiniteKernel kernel(p);
      if (!is_irreducible(kernel)) continue;
      WeightFunction wv(v);
      StateSet set = level_set(wv, level);
      auto cert = extract_minorization(kernel, square_pairs(set));
      if (!(cert.epsilon() > 0.0 && cert.epsilon() < 1.0)) continue;
      WeightFunction vbar = pair_average(wv);
      const auto constants = certify_homogeneous(kernel, cert, vbar);
      if (constants.vacuous || !(constants.lambda < 1.0)) continue;
      out.push_back({draw, std::move(kernel), std::move(wv), level, std::move(set), std::move(cert),
                     std::move(vbar), constants});
    } catch (const Degenerate&) {
    } catch (const InvalidInput&) {
    }
  }
  if (out.size() < count) throw Degenerate(cat("only ", out.size(), " certified chains found"));
  return out;
}

// ---------------------------------------------------------------------------
// 1. Domination of exact TV and f-norms on finite chains

SuiteReport finite_domination(const SuiteOptions& opt) {
  auto r = start(1, "finite-chain domination");
  const std::size_t horizon = opt.domination_horizon;
  constexpr double kSlack = -1e-9;
  const auto instances = finite_instances(opt.seed, opt.chain_count, opt.max_states);
  std::size_t checks = 0, violations = 0;
  double worst_tv = std::numeric_limits<double>::infinity(), worst_f = worst_tv;
  for (const auto& inst : instances) {
    const auto& c = inst.constants;
    for (const auto& lp : initial_pairs(inst, opt.seed)) {
      const bounds::HomogeneousBoundInput in{c.epsilon, c.lambda, c.b, c.B, pair_moment(lp.xi, lp.xi_prime, inst.vbar)};
      Measure a = lp.xi, b = lp.xi_prime;
      for (std::size_t n = 1; n <= horizon; ++n) {
        a = propagate(a, inst.kernel, 1);
        b = propagate(b, inst.kernel, 1);
        const Measure d = a - b;
        const double tv_slack = bounds::optimize_j(in, n, bounds::Norm::tv).value - tv_norm(d);
        const double f_slack = bounds::optimize_j(in, n, bounds::Norm::f).value - f_norm(d, inst.v);
        worst_tv = std::min(worst_tv, tv_slack);
        worst_f = std::min(worst_f, f_slack);
        checks += 2;
        if (tv_slack < kSlack) record(r, violations, cat("draw ", inst.draw, " n=", n, ": TV slack ", tv_slack));
        if (f_slack < kSlack) record(r, violations, cat("draw ", inst.draw, " n=", n, ": f slack ", f_slack));
      }
    }
  }
  r.metric("instances", double(instances.size()));
  r.metric("checks", double(checks));
  r.metric("violations", double(violations));
  r.metric("worst_tv_slack", worst_tv);
  r.metric("worst_f_slack", worst_f);
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 2. Exact weighted path identity

SuiteReport path_identity(const SuiteOptions& opt) {
  auto r = start(2, "exact path identity");
  constexpr double kTol = 1e-10;
  constexpr std::size_t kChainsPerSize = 4;
  constexpr std::size_t kMaxSteps = 4;
  std::size_t checks = 0, violations = 0, paths = 0;
  double worst = 0.0;

  const auto random_step = [](std::size_t n, Stream& rng, bool shrink) {
    FiniteKernel kernel(random_kernel(n, rng));
    std::vector<StatePair> pairs;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        if (rng.bernoulli(0.5)) pairs.emplace_back(x, y);
    if (pairs.empty()) pairs.emplace_back(0, n - 1);
    auto cert = extract_minorization(kernel, pairs);
    const double eps = shrink ? cert.epsilon() * (0.2 + 0.8 * rng.uniform()) : cert.epsilon();
    return coupling::CouplingStep(std::move(kernel), std::move(cert), eps);
  };

  std::uint64_t index = 0;
  for (std::size_t n = 2; n <= 4; ++n) {
    for (std::size_t c = 0; c < kChainsPerSize; ++c, ++index) {
      Stream rng(opt.seed ^ 0x2222ULL, index);
      const Measure xi = random_law(n, rng), xi_prime = random_law(n, rng);
      std::vector<std::pair<std::string, coupling::CouplingConfig>> configs;
      coupling::CouplingConfig constant;
      constant.steps.push_back(random_step(n, rng, false));
      configs.emplace_back("constant", constant);
      coupling::CouplingConfig reduced;
      reduced.steps.push_back(random_step(n, rng, true));
      configs.emplace_back("reduced", reduced);
      coupling::CouplingConfig per_step;
      for (std::size_t k = 0; k < kMaxSteps; ++k) per_step.steps.push_back(random_step(n, rng, true));
      configs.emplace_back("per-step", per_step);

      for (const auto& [label, cfg] : configs) {
        for (std::size_t steps = 1; steps <= kMaxSteps; ++steps) {
          const auto rep = coupling::path_basis_identity_check(cfg, xi, xi_prime, steps);
          ++checks;
          paths += rep.paths;
          worst = std::max(worst, rep.max_abs_diff);
          if (!(rep.max_abs_diff <= kTol))
            record(r, violations, cat("|X|=", n, " chain ", c, " ", label, " n=", steps, ": |LHS-RHS| = ",
                                      rep.max_abs_diff));
        }
      }
    }
  }
  r.metric("checks", double(checks));
  r.metric("paths", double(paths));
  r.metric("violations", double(violations));
  r.metric("max_abs_diff", worst);
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 3. Constant schedules reproduce the homogeneous bounds

SuiteReport homogeneous_reduction(const SuiteOptions& opt) {
  auto r = start(3, "homogeneous reduction");
  constexpr std::size_t kPoints = 100;
  constexpr std::size_t kZeroB = 20;
  constexpr std::size_t kHorizon = 30;
  constexpr double kRel = 1e-12;
  std::size_t checks = 0, violations = 0;
  double worst_tv = 0.0, worst_d = 0.0, worst_zero_b = 0.0;

  for (std::size_t p = 0; p < kPoints; ++p) {
    Stream rng(opt.seed ^ 0x3333ULL, p);
    bounds::HomogeneousBoundInput in{};
    in.epsilon = 0.01 + 0.98 * rng.uniform();
    in.lambda = 0.05 + 0.94 * rng.uniform();
    in.b = p < kZeroB ? 0.0 : 20.0 * rng.uniform();
    in.B = 1.0 + 14.0 * rng.uniform();
    in.v0 = 1.0 + 49.0 * rng.uniform();
    const auto sched = bounds::InhomogeneousSchedule::constant(in, kHorizon);
    for (std::size_t n = 1; n <= kHorizon; ++n) {
      double dn = in.v0;
      for (std::size_t k = 0; k < n; ++k) dn = in.lambda * dn + in.b;
      for (std::size_t j = 1; j <= n + 1; ++j) {
        const double tv_h = bounds::bound_tv_homog(in, n, j);
        const double tv_i = bounds::bound_inhom(sched, n, j, bounds::Norm::tv);
        const double rel_tv = std::abs(tv_h - tv_i) / std::max(1.0, std::abs(tv_h));
        worst_tv = std::max(worst_tv, rel_tv);
        ++checks;
        if (!(rel_tv <= kRel)) record(r, violations, cat("point ", p, " n=", n, " j=", j, ": TV rel diff ", rel_tv));

        const double f_h = bounds::bound_f_homog(in, n, j);
        const double f_i = bounds::bound_inhom(sched, n, j, bounds::Norm::f);
        const double head = j <= n ? 2.0 * std::pow(1.0 - in.epsilon, double(j)) : 0.0;
        const double f_expected = head * dn + (tv_h - head);
        const double rel_d = std::abs(f_i - f_expected) / std::max(1.0, std::abs(f_expected));
        worst_d = std::max(worst_d, rel_d);
        checks += 2;
        if (!(rel_d <= kRel)) record(r, violations, cat("point ", p, " n=", n, " j=", j, ": f rel diff ", rel_d));
        if (f_i > f_h * (1.0 + kRel))
          record(r, violations, cat("point ", p, " n=", n, " j=", j, ": inhomogeneous f bound ", f_i,
                                    " exceeds homogeneous ", f_h));
        if (in.b == 0.0) {
          const double rel = std::abs(f_h - f_i) / std::max(1.0, std::abs(f_h));
          worst_zero_b = std::max(worst_zero_b, rel);
          ++checks;
          if (!(rel <= kRel)) record(r, violations, cat("point ", p, " n=", n, " j=", j, ": b=0 f rel diff ", rel));
        }
      }
    }
  }
  r.metric("checks", double(checks));
  r.metric("violations", double(violations));
  r.metric("max_rel_diff_tv", worst_tv);
  r.metric("max_rel_diff_f_dn", worst_d);
  r.metric("max_rel_diff_f_b0", worst_zero_b);
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 4. Geometric rate against the exact f-norm at n = 200

SuiteReport rate_certification(const SuiteOptions& opt) {
  auto r = start(4, "rate certification");
  constexpr std::size_t kSteps = 200;
  constexpr double kTol = 0.01;
  const auto instances = finite_instances(opt.seed, opt.chain_count, opt.max_states);
  std::size_t violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& inst : instances) {
    // delta_x P^n - pi = (delta_x - pi)(P - 1 pi)^n, and the deflated kernel keeps the
    // difference free of the rounding floor that plain propagation hits near 1e-16.
    const Measure pi = stationary(inst.kernel);
    const std::size_t n = inst.kernel.size();
    const Eigen::MatrixXd deflated =
        inst.kernel.matrix() - Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)) * pi.transpose();
    double norm = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      Eigen::RowVectorXd mu = (point_mass(n, x) - pi).transpose();
      for (std::size_t k = 0; k < kSteps; ++k) mu = mu * deflated;
      norm = std::max(norm, f_norm(mu.transpose(), inst.v));
    }
    const double observed = std::log(norm) / double(kSteps);
    const auto rate = bounds::rate_bound(inst.constants.epsilon, inst.constants.lambda, inst.constants.M);
    const double slack = rate.rate + kTol - observed;
    worst = std::min(worst, slack);
    if (!(slack >= 0.0))
      record(r, violations, cat("draw ", inst.draw, ": observed rate ", observed, " > certified ", rate.rate));
  }
  r.metric("instances", double(instances.size()));
  r.metric("violations", double(violations));
  r.metric("worst_slack", worst);
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 5. Pair drift derived from the univariate small-set condition

SuiteReport small_set_consistency(const SuiteOptions& opt) {
  auto r = start(5, "small-set drift consistency");
  constexpr double kTol = 1e-9;
  const auto instances = finite_instances(opt.seed, opt.chain_count, opt.max_states);
  std::size_t satisfied = 0, skipped_eps = 0, violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& inst : instances) {
    const auto small = small_set_certificate(inst.kernel, inst.set);
    if (!(small.epsilon() > 0.0 && small.epsilon() < 1.0)) {
      ++skipped_eps;
      continue;
    }
    const auto uni = verify_drift(inst.kernel, inst.v, inst.set);
    if (uni.violation || uni.vacuous || !(uni.lambda_min > 0.0)) continue;
    double c = 0.0;
    for (std::size_t x = 0; x < inst.set.size(); ++x)
      if (inst.set[x]) c = std::max(c, inst.v[x]);
    if (!(uni.lambda_min + uni.b_min / (1.0 + c) < 1.0)) continue;
    ++satisfied;
    const auto s = bounds::derive_s_params(uni.lambda_min, uni.b_min, c, small.epsilon());
    const auto star = build_product_pstar(inst.kernel, small);
    const StateSet mask = small.product_mask();
    const Eigen::VectorXd kv = star.kernel().apply(inst.vbar.values());
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mask.size(); ++i)
      excess = std::max(excess, kv(static_cast<Eigen::Index>(i)) - s.lambda * inst.vbar[i] - (mask[i] ? s.b : 0.0));
    worst = std::max(worst, excess);
    if (!drift_holds(star.kernel(), inst.vbar, mask, s.lambda, s.b, kTol))
      record(r, violations, cat("draw ", inst.draw, ": pair drift exceeded by ", excess));
  }
  if (satisfied == 0) r.fail("no instance satisfies the small-set condition");
  r.metric("instances", double(instances.size()));
  r.metric("satisfying", double(satisfied));
  r.metric("skipped_zero_overlap", double(skipped_eps));
  r.metric("violations", double(violations));
  r.metric("max_excess", worst);
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 6. Autoregression: constants and domination

SuiteReport autoregression(const SuiteOptions& opt) {
  auto r = start(6, "autoregression example");
  constexpr double kEpsExpected = 0.317311;
  constexpr double kBExpected = 3.353361;
  constexpr double kConstTol = 1e-6;
  constexpr std::size_t kHorizon = 30;
  constexpr double kCrossMoment = 7.0;  // 1 + |(-3) - 3|
  constexpr double kSlack = -1e-12;

  ar::ARModel m{ar::MapFunction::linear(0.5), ar::NoiseDensity::gaussian(1.0), 4.0, 0.8};
  m.validate();
  m.require_bound_delta();
  const auto eps = ar::eps_delta_report(m);
  const double B = ar::ar_B(m, eps.epsilon);
  r.metric("eps_quadrature", eps.quadrature);
  r.metric("eps_closed_form", eps.closed_form);
  r.metric("B", B);
  if (!(std::abs(eps.quadrature - kEpsExpected) <= kConstTol))
    r.fail(cat("eps(delta) by quadrature = ", eps.quadrature));
  if (!(std::abs(eps.closed_form - kEpsExpected) <= kConstTol))
    r.fail(cat("eps(delta) closed form = ", eps.closed_form));
  if (!(std::abs(B - kBExpected) <= kConstTol)) r.fail(cat("B = ", B));

  std::vector<double> bound(kHorizon + 1, 0.0);
  for (std::size_t n = 1; n <= kHorizon; ++n) {
    bound[n] = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j <= n + 1; ++j)
      bound[n] = std::min(bound[n], ar::ar_bound(m, eps.epsilon, n, j, kCrossMoment));
  }

  constexpr double kLo = -10.0, kHi = 10.0;
  constexpr std::size_t kGrid = 2001;
  const FiniteKernel grid = ar::discretize(m, kLo, kHi, kGrid);
  Measure a = ar::grid_point_mass(kLo, kHi, kGrid, -3.0);
  Measure b = ar::grid_point_mass(kLo, kHi, kGrid, 3.0);
  std::size_t violations = 0;
  double worst_exact = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n <= kHorizon; ++n) {
    a = propagate(a, grid, 1);
    b = propagate(b, grid, 1);
    const double tv = tv_norm(a - b);
    worst_exact = std::min(worst_exact, bound[n] - tv);
    if (bound[n] - tv < kSlack) record(r, violations, cat("n=", n, ": bound ", bound[n], " < grid TV ", tv));
  }

  ar::ARCoupling coupler(m, eps.epsilon);
  ar::ARRunConfig cfg{-3.0, 3.0, kHorizon, opt.replicas, opt.seed ^ 0x6666ULL, opt.threads};
  std::vector<double> thresholds;
  for (int k = -60; k <= 60; ++k) thresholds.push_back(0.1 * k);
  const auto lower = ar::threshold_tv_lower_bound(coupler, cfg, thresholds);
  double worst_mc = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n <= kHorizon; ++n) {
    worst_mc = std::min(worst_mc, bound[n] - lower.lower[n]);
    if (bound[n] - lower.lower[n] < kSlack)
      record(r, violations, cat("n=", n, ": bound ", bound[n], " < Monte Carlo lower bound ", lower.lower[n]));
  }
  r.metric("violations", double(violations));
  r.metric("worst_slack_grid", worst_exact);
  r.metric("worst_slack_mc", worst_mc);
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 7. Coupling-time estimates dominate exact TV

SuiteReport coupling_validity(const SuiteOptions& opt) {
  auto r = start(7, "coupling validity");
  constexpr std::size_t kHorizon = 20;
  const auto instances = finite_instances(opt.seed, opt.chain_count, opt.max_states);
  std::size_t checks = 0, violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& inst : instances) {
    const auto& vals = inst.v.values();
    Eigen::Index lo = 0, hi = 0;
    vals.minCoeff(&lo);
    vals.maxCoeff(&hi);
    const std::size_t n = inst.kernel.size();
    const Measure xi = point_mass(n, static_cast<std::size_t>(lo));
    const Measure xi_prime = point_mass(n, static_cast<std::size_t>(hi));
    auto cfg = coupling::homogeneous_config(inst.kernel, inst.cert, opt.seed ^ (0x7777ULL + inst.draw));
    cfg.threads = opt.threads;
    const auto run = coupling::run_coupling(cfg, xi, xi_prime, kHorizon, opt.replicas);
    Measure a = xi, b = xi_prime;
    for (std::size_t t = 1; t <= kHorizon; ++t) {
      a = propagate(a, inst.kernel, 1);
      b = propagate(b, inst.kernel, 1);
      const double slack = run.tv_upper(t) + 3.0 * run.tv_upper_se(t) - tv_norm(a - b);
      worst = std::min(worst, slack);
      ++checks;
      if (slack < 0.0) record(r, violations, cat("draw ", inst.draw, " n=", t, ": slack ", slack));
    }
  }
  r.metric("checks", double(checks));
  r.metric("violations", double(violations));
  r.metric("worst_slack", worst);
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 8. Annealing drift constants

SuiteReport annealing_constants(const SuiteOptions&) {
  auto r = start(8, "annealing drift constants");
  constexpr double kBeta = 0.75;
  constexpr double kTol = 1e-6;
  const auto obj = anneal::Objective::doublewell();
  const auto q = anneal::Proposal::gaussian(1.0);
  anneal::DriftConstants k;
  try {
    k = anneal::derive_drift_constants(obj, q, kBeta);
  } catch (const std::exception& e) {
    r.fail(cat("derivation failed: ", e.what()));
    return finish(std::move(r));
  }
  const auto grid = anneal::check_drift_constants(obj, q, k);
  const double post =
      anneal::r_gamma_s(k.gamma_underline, k.s) * (1.0 + k.eps_slack) / 2.0 + k.eps_slack / 2.0;
  r.metric("s", k.s);
  r.metric("x_underline", k.x_underline);
  r.metric("gamma_underline", k.gamma_underline);
  r.metric("lambda0", k.lambda0);
  r.metric("b", k.b);
  r.metric("d", k.d);
  r.metric("ratio_excess", grid.ratio_excess);
  r.metric("tail_excess", grid.tail_excess);
  r.metric("univariate_excess", grid.univariate_excess);
  r.metric("bivariate_excess", grid.bivariate_excess);
  r.metric("evaluations", double(grid.evaluations));
  if (grid.ratio_excess > kTol) r.fail(cat("K V_s / V_s exceeds r(gamma, s) by ", grid.ratio_excess));
  if (grid.tail_excess > kTol) r.fail(cat("K V_s / V_s exceeds beta by ", grid.tail_excess));
  if (grid.univariate_excess > kTol) r.fail(cat("univariate drift exceeded by ", grid.univariate_excess));
  if (grid.bivariate_excess > kTol) r.fail(cat("bivariate drift exceeded by ", grid.bivariate_excess));
  if (post > kBeta + kTol) r.fail(cat("r(gamma_underline, s) postcondition: ", post, " > beta"));
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 9. Laplace approximation and temperature-shift bound

SuiteReport laplace_and_shift(const SuiteOptions&) {
  auto r = start(9, "Laplace and temperature-shift bounds");
  constexpr double kRel = 0.05;
  constexpr double kSlack = -1e-8;
  const auto obj = anneal::Objective::doublewell();
  const double z_quad = anneal::TargetLaw(obj, 50.0).Z();
  const double z_lap = anneal::laplace_Z(obj, 50.0);
  const double rel = std::abs(z_lap - z_quad) / z_quad;
  r.metric("Z_quadrature_50", z_quad);
  r.metric("Z_laplace_50", z_lap);
  r.metric("rel_error", rel);
  if (!(rel <= kRel)) r.fail(cat("Laplace relative error ", rel));
  if (!(std::abs(z_lap - std::sqrt(M_PI / 50.0)) <= 1e-12)) r.fail(cat("laplace_Z(50) = ", z_lap));

  const std::vector<double> gammas{1, 2, 5, 10, 20, 50};
  double worst = std::numeric_limits<double>::infinity();
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    for (std::size_t k = i + 1; k < gammas.size(); ++k) {
      const auto s = anneal::pi_shift_tv_bound(obj, gammas[i], gammas[k]);
      ++pairs;
      worst = std::min(worst, s.bound - s.exact_tv);
      if (!s.hypothesis_holds) r.fail(cat("gamma ", gammas[i], " -> ", gammas[k], ": ordering hypothesis fails"));
      if (s.bound - s.exact_tv < kSlack)
        r.fail(cat("gamma ", gammas[i], " -> ", gammas[k], ": bound ", s.bound, " < exact ", s.exact_tv));
    }
  }
  r.metric("pairs", double(pairs));
  r.metric("worst_shift_slack", worst);
  return finish(std::move(r));
}

// ---------------------------------------------------------------------------
// 10. Annealing convergence

SuiteReport annealing_convergence(const SuiteOptions& opt) {
  auto r = start(10, "annealing convergence");
  constexpr double kBeta = 0.75;
  constexpr double kFinalTv = 0.15;
  constexpr double kNearMass = 0.9;
  const auto obj = anneal::Objective::doublewell();
  const auto q = anneal::Proposal::gaussian(1.0);
  const auto k = anneal::derive_drift_constants(obj, q, kBeta);

  anneal::AnnealConfig cfg;
  cfg.schedule = {k.d, 0.0, k.gamma_underline};
  cfg.replicas = opt.anneal_replicas;
  cfg.checkpoints = {100, 1000, 10000};
  cfg.x0 = 3.0;
  cfg.seed = 1;
  cfg.threads = opt.threads;
  const auto res = anneal::run_annealing(obj, q, cfg);

  for (const auto& cp : res.checkpoints) {
    r.metric(cat("tv_n", cp.n), cp.tv_estimate);
    r.metric(cat("near_n", cp.n), cp.mass_near_any);
  }
  for (std::size_t i = 1; i < res.checkpoints.size(); ++i) {
    const auto& prev = res.checkpoints[i - 1];
    const auto& cur = res.checkpoints[i];
    if (!(cur.tv_estimate < prev.tv_estimate))
      r.fail(cat("TV estimate not decreasing: n=", prev.n, " ", prev.tv_estimate, " -> n=", cur.n, " ",
                 cur.tv_estimate));
  }
  const auto& last = res.checkpoints.back();
  if (!(last.tv_estimate <= kFinalTv)) r.fail(cat("final TV estimate ", last.tv_estimate));
  if (!(last.mass_near_any >= kNearMass)) r.fail(cat("final mass near the minima ", last.mass_near_any));
  return finish(std::move(r));
}

SuiteReport run_suite(int id, const SuiteOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport r;
  try {
    switch (id) {
      case 1: r = finite_domination(opt); break;
      case 2: r = path_identity(opt); break;
      case 3: r = homogeneous_reduction(opt); break;
      case 4: r = rate_certification(opt); break;
      case 5: r = small_set_consistency(opt); break;
      case 6: r = autoregression(opt); break;
      case 7: r = coupling_validity(opt); break;
      case 8: r = annealing_constants(opt); break;
      case 9: r = laplace_and_shift(opt); break;
      case 10: r = annealing_convergence(opt); break;
      default: detail::reject(cat("suite id must lie in 1..", kSuiteCount));
    }
  } catch (const Degenerate& e) {
    r = start(id, "error");
    r.fail(e.what());
    r.passed = false;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace mcbound::verify
