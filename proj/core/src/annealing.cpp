#include "mcbound/annealing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/minima.hpp>

#include "mcbound/error.hpp"
#include "mcbound/parallel.hpp"
#include "mcbound/quadrature.hpp"

namespace mcbound::anneal {

using detail::reject;
using detail::require;

namespace {

constexpr std::size_t kChunks = 64;

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

// Maximum of fn on [lo, hi]: dense grid, then Brent on the cells around the best point.
double grid_max(const std::function<double(double)>& fn, double lo, double hi, std::size_t points) {
  if (hi <= lo) return fn(lo);
  const auto xs = linspace(lo, hi, points);
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double v = fn(xs[i]);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  const double a = xs[best > 0 ? best - 1 : 0];
  const double b = xs[std::min(best + 1, xs.size() - 1)];
  if (b > a) {
    const auto r = boost::math::tools::brent_find_minima([&](double x) { return -fn(x); }, a, b, 50);
    best_v = std::max(best_v, -r.second);
  }
  return best_v;
}

// phi_{gamma,s}(exp(-delta)) in a form that never overflows.
double phi_of_increment(double delta, double gamma, double s) {
  if (delta <= 0.0) return std::exp(s * delta);
  return std::exp((s - gamma) * delta) + 1.0 - std::exp(-gamma * delta);
}

// Kinks of z -> phi(exp(-(f(x+z) - f(x)))): the roots of f(x+z) = f(x) in [-w, w],
// plus geometric points around z = 0 where the integrand can vary on tiny scales.
std::vector<double> ratio_breakpoints(const Objective& obj, double x, double w) {
  std::vector<double> k{0.0};
  for (int e = 1; e <= 8; ++e) {
    const double h = std::pow(10.0, -e);
    k.push_back(h);
    k.push_back(-h);
  }
  const double fx = obj.f(x);
  const auto delta = [&](double z) { return obj.f(x + z) - fx; };
  constexpr int kScan = 2000;
  double prev_z = -w, prev_d = delta(-w);
  for (int i = 1; i <= kScan; ++i) {
    const double z = -w + 2.0 * w * i / kScan;
    const double d = delta(z);
    if ((prev_d < 0.0) != (d < 0.0)) {
      double lo = prev_z, hi = z;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((delta(mid) < 0.0) == (prev_d < 0.0)) lo = mid; else hi = mid;
      }
      k.push_back(0.5 * (lo + hi));
    }
    prev_z = z;
    prev_d = d;
  }
  return k;
}

// Smallest argument in [lo, hi] with pred true, for a predicate monotone false -> true.
template <typename Pred>
double bisect_first_true(Pred pred, double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid)) hi = mid; else lo = mid;
  }
  return hi;
}

}  // namespace

// ---------------------------------------------------------------------------
// Objective and proposal

Objective Objective::quadratic() {
  Objective o;
  o.name = "quadratic";
  o.f = [](double x) { return 0.5 * x * x; };
  o.df = [](double x) { return x; };
  o.d2f = [](double) { return 1.0; };
  o.alpha = 1.0;
  o.x1 = 1.0;
  o.minima = {0.0};
  return o;
}

Objective Objective::doublewell() {
  Objective o;
  o.name = "doublewell";
  o.f = [](double x) {
    const double t = x * x - 1.0;
    return t * t;
  };
  o.df = [](double x) { return 4.0 * x * (x * x - 1.0); };
  o.d2f = [](double x) { return 12.0 * x * x - 4.0; };
  o.alpha = 2.0;
  o.x1 = 1.2;
  o.minima = {-1.0, 1.0};
  return o;
}

Objective Objective::named(const std::string& name) {
  if (name == "quadratic") return quadratic();
  if (name == "doublewell") return doublewell();
  reject("objective must be 'quadratic' or 'doublewell', got '" + name + "'");
}

void Objective::validate() const {
  require(f && df && d2f, "objective evaluators are missing");
  require(alpha > 0.0, "alpha must be > 0");
  const auto grid = linspace(std::max(x1, 0.0), std::max(x1, 0.0) + 20.0, 201);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i; j < grid.size(); ++j) {
      const double x = grid[i], y = grid[j];
      if (f(y) - f(x) < alpha * (y - x) - 1e-9) reject("growth condition fails to the right of x1");
      if (f(-y) - f(-x) < alpha * (y - x) - 1e-9) reject("growth condition fails to the left of -x1");
    }
  }
  for (double m : minima) {
    require(std::abs(m) <= std::abs(x1) + 1e-12, "declared minima must lie in [-x1, x1]");
    require(d2f(m) > 0.0, "f'' must be > 0 at every declared minimum");
  }
}

double Objective::f_min() const {
  if (!minima.empty()) {
    double v = std::numeric_limits<double>::infinity();
    for (double m : minima) v = std::min(v, f(m));
    return v;
  }
  const double a = std::abs(x1);
  return -grid_max([this](double x) { return -f(x); }, -a, a, 4001);
}

Proposal Proposal::gaussian(double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), "proposal sigma must be > 0");
  Proposal p;
  std::ostringstream name;
  name.precision(17);
  name << "gauss:" << sigma;
  p.name = name.str();
  p.pdf = [sigma](double z) {
    const double t = z / sigma;
    return std::exp(-0.5 * t * t) / (sigma * std::sqrt(2.0 * M_PI));
  };
  p.sample = [sigma](Stream& rng) { return rng.normal(0.0, sigma); };
  p.upper_tail = [sigma](double t) { return 0.5 * std::erfc(t / (sigma * M_SQRT2)); };
  p.effective_halfwidth = 12.0 * sigma;
  return p;
}

Proposal Proposal::uniform(double half_width) {
  require(half_width > 0.0 && std::isfinite(half_width), "uniform half-width must be > 0");
  Proposal p;
  std::ostringstream name;
  name.precision(17);
  name << "uniform:" << half_width;
  p.name = name.str();
  p.pdf = [half_width](double z) { return std::abs(z) <= half_width ? 0.5 / half_width : 0.0; };
  p.sample = [half_width](Stream& rng) { return half_width * (2.0 * rng.uniform() - 1.0); };
  p.upper_tail = [half_width](double t) {
    return std::clamp((half_width - t) / (2.0 * half_width), 0.0, 1.0);
  };
  p.effective_halfwidth = half_width;
  p.compact_support = half_width;
  return p;
}

Proposal Proposal::parse(const std::string& spec) {
  const auto param = [&](std::size_t prefix) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(spec.substr(prefix), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != spec.size() - prefix) reject("malformed proposal '" + spec + "'");
    return v;
  };
  if (spec.rfind("gauss:", 0) == 0) return gaussian(param(6));
  if (spec.rfind("uniform:", 0) == 0) return uniform(param(8));
  reject("proposal must be 'gauss:sigma' or 'uniform:h', got '" + spec + "'");
}

void Proposal::validate() const {
  require(pdf && sample && upper_tail, "proposal evaluators are missing");
  const double w = compact_support > 0.0 ? compact_support : std::min(effective_halfwidth, 8.0);
  for (double z : linspace(0.0, w, 401)) {
    if (std::abs(pdf(z) - pdf(-z)) > 1e-10) reject("proposal density must be symmetric");
    if (!(pdf(z) > 0.0)) reject("proposal density must be positive on its support");
  }
}

// ---------------------------------------------------------------------------
// Kernel

double accept_prob(const Objective& obj, double x, double y, double gamma) {
  require(gamma >= 0.0, "gamma must be >= 0");
  const double delta = obj.f(y) - obj.f(x);
  if (delta <= 0.0 || gamma == 0.0) return 1.0;
  return std::exp(-gamma * delta);
}

double rwmh_step(const Objective& obj, const Proposal& q, double x, double gamma, Stream& rng) {
  const double y = x + q.sample(rng);
  const double delta = obj.f(y) - obj.f(x);
  if (delta <= 0.0 || gamma == 0.0) return y;
  return rng.uniform() < std::exp(-gamma * delta) ? y : x;
}

// ---------------------------------------------------------------------------
// Target law

TargetLaw::TargetLaw(const Objective& obj, double gamma, double tail_tol)
    : obj_(obj), gamma_(gamma), f_min_(obj.f_min()) {
  require(gamma > 0.0 && std::isfinite(gamma), "gamma must be > 0");
  require(tail_tol > 0.0, "tail tolerance must be > 0");
  const double x1 = std::abs(obj_.x1);
  const double ga = gamma_ * obj_.alpha;
  const auto h = [this](double x) { return std::exp(-gamma_ * (obj_.f(x) - f_min_)); };

  knots_ = obj_.minima;
  knots_.push_back(0.0);
  knots_.push_back(-x1);
  knots_.push_back(x1);
  // Points where the width of the wells is resolved.
  for (double m : obj_.minima) {
    const double w = 1.0 / std::sqrt(gamma_ * std::max(obj_.d2f(m), 1e-12));
    for (double k : {-6.0, -2.0, 2.0, 6.0}) knots_.push_back(m + k * w);
  }
  std::sort(knots_.begin(), knots_.end());

  const double z_inner = integrate_or_throw(h, -x1, x1, 1e-12, knots_);
  require(z_inner > 0.0, "target has no mass on [-x1, x1]");
  // Beyond x1, f(x) >= f(x1) + alpha (x - x1), so each tail past A is at most
  // exp(-gamma (f(+-x1) - f_min)) exp(-gamma alpha (A - x1)) / (gamma alpha).
  const double head = std::exp(-gamma_ * (std::min(obj_.f(x1), obj_.f(-x1)) - f_min_)) / ga;
  const auto tail_at = [&](double a) { return 2.0 * head * std::exp(-ga * (a - x1)); };
  double a = x1 + std::max(0.0, std::log(2.0 * head / (0.5 * tail_tol * z_inner)) / ga);
  for (;;) {
    const double z = integrate_or_throw(h, -a, a, 1e-12 * std::max(1.0, z_inner), knots_);
    if (tail_at(a) <= tail_tol * z) {
      half_width_ = a;
      Z_ = z;
      tail_bound_ = tail_at(a) / z;
      break;
    }
    a = x1 + 1.5 * (a - x1) + 1.0;
    ++enlargements_;
    if (enlargements_ > 50) throw Degenerate("target truncation could not be made tight enough");
  }
  log_Z_raw_ = std::log(Z_) - gamma_ * f_min_;
  knots_.erase(std::remove_if(knots_.begin(), knots_.end(),
                              [this](double k) { return k <= -half_width_ || k >= half_width_; }),
               knots_.end());
}

double TargetLaw::density(double x) const {
  if (x < -half_width_ || x > half_width_) return 0.0;
  return std::exp(-gamma_ * (obj_.f(x) - f_min_)) / Z_;
}

double TargetLaw::mass(double a, double b) const {
  a = std::max(a, -half_width_);
  b = std::min(b, half_width_);
  if (b <= a) return 0.0;
  return integrate_or_throw([this](double x) { return density(x); }, a, b, 1e-12, knots_);
}

double kernel_pushforward_density(const Objective& obj, const Proposal& q, const TargetLaw& pi, double y) {
  const double gamma = pi.gamma();
  const double a = pi.half_width();
  std::vector<double> knots = pi.knots();
  knots.push_back(y);
  knots.push_back(-y);
  const double in = integrate_or_throw(
      [&](double x) { return pi.density(x) * accept_prob(obj, x, y, gamma) * q.pdf(y - x); }, -a, a, 1e-11,
      knots);
  const double w = q.effective_halfwidth;
  const double move = integrate_or_throw(
      [&](double z) { return accept_prob(obj, y, y + z, gamma) * q.pdf(z); }, -w, w, 1e-11,
      ratio_breakpoints(obj, y, w));
  return in + pi.density(y) * (1.0 - move);
}

// ---------------------------------------------------------------------------
// Minorization

double oscillation(const Objective& obj, Interval c) {
  require(c.hi >= c.lo, "interval must satisfy lo <= hi");
  const double hi = grid_max(obj.f, c.lo, c.hi, 20001);
  const double lo = -grid_max([&](double x) { return -obj.f(x); }, c.lo, c.hi, 20001);
  return std::max(0.0, hi - lo);
}

Minorization minorization_gamma(Interval c, double gamma, const Proposal& q, const Objective& obj) {
  require(c.hi > c.lo, "coupling set must have positive length");
  require(gamma >= 0.0, "gamma must be >= 0");
  Minorization out;
  out.set = c;
  // Symmetric q: inf over C x C of q(y - x) is the inf of q over [0, |C|].
  out.eps_q = std::numeric_limits<double>::infinity();
  for (double z : linspace(0.0, c.length(), 1001)) out.eps_q = std::min(out.eps_q, q.pdf(z));
  if (!(out.eps_q > 0.0)) throw Degenerate("proposal density vanishes across the coupling set: eps = 0");
  out.d = oscillation(obj, c);
  out.eps_gamma = out.eps_q * std::exp(-gamma * out.d) * c.length();
  return out;
}

// ---------------------------------------------------------------------------
// Drift

double r_gamma_s(double gamma, double s) {
  require(s > 0.0 && s < gamma, "r(gamma, s) requires 0 < s < gamma");
  const double t = (gamma - s) / gamma;
  return 1.0 - std::pow(t, gamma / s) + std::pow(t, (gamma - s) / s);
}

double phi_gamma_s(double u, double gamma, double s) {
  require(u >= 0.0, "phi is defined for u >= 0");
  if (u == 0.0) return 1.0;
  return phi_of_increment(-std::log(u), gamma, s);
}

double kv_ratio(const Objective& obj, const Proposal& q, double x, double gamma, double s) {
  const double fx = obj.f(x);
  const double w = q.effective_halfwidth;
  const auto r = integrate([&](double z) { return q.pdf(z) * phi_of_increment(obj.f(x + z) - fx, gamma, s); },
                           -w, w, 1e-10, ratio_breakpoints(obj, x, w));
  if (!r.converged) {
    std::ostringstream msg;
    msg << "K V_s quadrature at x = " << x << " did not converge (achieved " << r.error_estimate << ")";
    throw Degenerate(msg.str());
  }
  return r.value;
}

DriftConstants derive_drift_constants(const Objective& obj, const Proposal& q, double beta, double lambda) {
  require(beta > 0.5 && beta < 1.0, "beta must lie in (1/2, 1)");
  obj.validate();
  q.validate();
  DriftConstants k;
  k.beta = beta;
  k.eps_slack = (2.0 * beta - 1.0) / 3.0;
  const double half = 0.5 * k.eps_slack;

  // Left tail of q below -M at most eps/2.
  if (q.compact_support > 0.0) {
    k.M = q.compact_support;
  } else {
    double hi = 1.0;
    while (q.upper_tail(hi) > half) hi *= 2.0;
    k.M = bisect_first_true([&](double m) { return q.upper_tail(m) <= half; }, 0.0, hi);
  }

  // s with ∫_{-M}^0 exp(alpha s z) q(z) dz <= eps/2.
  const auto near_mass = [&](double s) {
    return integrate_or_throw([&](double z) { return std::exp(obj.alpha * s * z) * q.pdf(z); }, -k.M, 0.0,
                              1e-12);
  };
  double s_hi = 0.5;
  while (near_mass(s_hi) > half) {
    s_hi *= 2.0;
    if (s_hi > 1e6) throw Degenerate("no drift exponent s satisfies the near-mass condition");
  }
  k.s = bisect_first_true([&](double s) { return near_mass(s) <= half; }, 0.0, s_hi, 80);
  k.x_underline = std::abs(obj.x1) + k.M;

  // gamma_underline with r(gamma, s) <= (beta - eps/2) / ((1 + eps)/2).
  const double target = (beta - half) / (0.5 * (1.0 + k.eps_slack));
  constexpr double kGammaCap = 1e6;
  if (!(k.s < kGammaCap) || r_gamma_s(kGammaCap, k.s) > target) {
    std::ostringstream msg;
    msg << "beta = " << beta << " infeasible: r(gamma, s) stays above " << target << " for gamma <= 1e6";
    throw Degenerate(msg.str());
  }
  k.gamma_underline = bisect_first_true([&](double g) { return r_gamma_s(g, k.s) <= target; },
                                        k.s * (1.0 + 1e-12), kGammaCap);

  // Univariate drift on [-x_underline, x_underline]. Work with log V_s = s f.
  k.lambda0 = beta;
  const double xu = k.x_underline;
  const double log_c0 = k.s * grid_max(obj.f, -xu, xu, 4001);
  k.c0 = std::exp(log_c0);
  // b = max (K V_s - lambda0 V_s); K V_s is nonincreasing in gamma, so gamma_underline suffices.
  const auto log_excess = [&](double x) {
    const double e = kv_ratio(obj, q, x, k.gamma_underline, k.s) - k.lambda0;
    return e > 0.0 ? std::log(e) + k.s * obj.f(x) : -std::numeric_limits<double>::infinity();
  };
  const double log_b = grid_max(log_excess, -xu, xu, 2001);
  k.b = std::isfinite(log_b) ? std::exp(log_b) : 0.0;
  require(std::isfinite(k.c0) && std::isfinite(k.b), "drift constants overflow double precision");

  k.lambda = lambda < 0.0 ? 0.5 * (k.lambda0 + 1.0) : lambda;
  require(k.lambda > k.lambda0 && k.lambda < 1.0, "lambda must lie in (lambda0, 1)");
  k.c = std::max(k.b / (k.lambda - k.lambda0) - 1.0, k.c0);

  // {V_s <= c} = {f <= log(c)/s}: an interval whose endpoints lie beyond +-x_underline.
  const double level = std::log(k.c) / k.s;
  const auto endpoint = [&](double sign) {
    double lo = xu, hi = xu + 1.0;
    while (obj.f(sign * hi) <= level) hi = xu + 2.0 * (hi - xu);
    return sign * bisect_first_true([&](double x) { return obj.f(sign * x) > level; }, lo, hi);
  };
  k.level_set = {endpoint(-1.0), endpoint(1.0)};
  k.d = oscillation(obj, k.level_set);
  return k;
}

DriftGridReport check_drift_constants(const Objective& obj, const Proposal& q, const DriftConstants& k) {
  DriftGridReport rep;
  const auto xs = linspace(-20.0, 20.0, 161);

  for (double mult : {2.0, 4.0, 10.0}) {
    const double g = mult * k.s;
    const double r = r_gamma_s(g, k.s);
    for (double x : xs) {
      rep.ratio_excess = std::max(rep.ratio_excess, kv_ratio(obj, q, x, g, k.s) - r);
      ++rep.evaluations;
    }
  }

  const std::vector<double> gammas{k.gamma_underline, 1.5 * k.gamma_underline, 3.0 * k.gamma_underline,
                                   10.0 * k.gamma_underline};
  // Outer grid for the tail condition; inner grid for the inequalities on the set.
  std::vector<double> outer;
  for (double x : linspace(k.x_underline, 20.0, 121)) {
    outer.push_back(x);
    outer.push_back(-x);
  }
  const double span = 1.25 * std::max(-k.level_set.lo, k.level_set.hi);
  auto inner = linspace(-span, span, 241);
  for (double x : {k.level_set.lo, k.level_set.hi, -k.x_underline, k.x_underline}) inner.push_back(x);

  for (double g : gammas) {
    for (double x : outer) {
      rep.tail_excess = std::max(rep.tail_excess, kv_ratio(obj, q, x, g, k.s) - k.beta);
      ++rep.evaluations;
    }
    std::vector<double> ratio(inner.size()), logv(inner.size());
    for (std::size_t i = 0; i < inner.size(); ++i) {
      const double x = inner[i];
      ratio[i] = kv_ratio(obj, q, x, g, k.s);
      logv[i] = k.s * obj.f(x);
      ++rep.evaluations;
      // K V_s / V_s <= lambda0 + b 1{V_s <= c0} / V_s.
      const double allow = k.lambda0 + (logv[i] <= std::log(k.c0) ? k.b * std::exp(-logv[i]) : 0.0);
      rep.univariate_excess = std::max(rep.univariate_excess, ratio[i] - allow);
    }
    const double log_c = std::log(k.c);
    for (std::size_t i = 0; i < inner.size(); ++i) {
      for (std::size_t j = 0; j < inner.size(); ++j) {
        // Divide both sides by V̄_s = (V_s(x) + V_s(x'))/2, computed relative to the larger term.
        const double top = std::max(logv[i], logv[j]);
        const double wi = std::exp(logv[i] - top), wj = std::exp(logv[j] - top);
        const double vbar = 0.5 * (wi + wj);
        const double lhs = 0.5 * (ratio[i] * wi + ratio[j] * wj) / vbar;
        const bool in_set = logv[i] <= log_c && logv[j] <= log_c;
        const double rhs = k.lambda + (in_set ? k.b * std::exp(-top) / vbar : 0.0);
        rep.bivariate_excess = std::max(rep.bivariate_excess, lhs - rhs);
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Schedule and runner

void CoolingSchedule::validate() const {
  require(d > 0.0 && std::isfinite(d), "schedule d must be > 0");
  require(xi >= 0.0, "schedule xi must be >= 0");
  require(gamma_underline >= 0.0, "gamma_underline must be >= 0");
}

double cooling_gamma(std::size_t i, const CoolingSchedule& sched) {
  sched.validate();
  return std::log(static_cast<double>(i) + 1.0) / (sched.d * (1.0 + sched.xi)) + sched.gamma_underline;
}

double schedule_epsilon(std::size_t i, const CoolingSchedule& sched, const Minorization& m0) {
  return m0.eps_q * m0.set.length() * std::exp(-cooling_gamma(i, sched) * m0.d);
}

AnnealResult run_annealing(const Objective& obj, const Proposal& q, const AnnealConfig& cfg) {
  require(cfg.replicas >= 2, "replica count must be >= 2");
  require(!cfg.checkpoints.empty(), "at least one checkpoint is needed");
  require(cfg.bin_width > 0.0, "bin width must be > 0");
  if (!cfg.frozen) cfg.schedule.validate();
  require(!cfg.frozen || cfg.frozen_gamma > 0.0, "frozen gamma must be > 0");
  std::vector<std::size_t> cps = cfg.checkpoints;
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  require(cps.front() >= 1, "checkpoints must be >= 1");
  const std::size_t n_steps = cps.back();
  const auto gamma_at = [&](std::size_t i) { return cfg.frozen ? cfg.frozen_gamma : cooling_gamma(i, cfg.schedule); };

  // Fixed binning over a range that holds pi_gamma for every checkpoint gamma.
  double range = 0.0;
  std::vector<TargetLaw> laws;
  for (std::size_t n : cps) {
    laws.emplace_back(obj, gamma_at(n));
    range = std::max(range, laws.back().half_width());
  }
  const auto bins = static_cast<std::size_t>(std::ceil(2.0 * range / cfg.bin_width));
  const double lo = -0.5 * static_cast<double>(bins) * cfg.bin_width;

  // Inverse-CDF table for starting draws.
  std::vector<double> start_x, start_cdf;
  if (cfg.start_from_target) {
    const TargetLaw start(obj, cfg.start_gamma);
    start_x = linspace(-start.half_width(), start.half_width(), 20001);
    start_cdf.assign(start_x.size(), 0.0);
    for (std::size_t i = 1; i < start_x.size(); ++i)
      start_cdf[i] = start_cdf[i - 1] +
                     0.5 * (start.density(start_x[i]) + start.density(start_x[i - 1])) * (start_x[i] - start_x[i - 1]);
    for (auto& v : start_cdf) v /= start_cdf.back();
  }
  const auto draw_start = [&](Stream& rng) {
    if (!cfg.start_from_target) return cfg.x0;
    const double u = rng.uniform();
    const auto it = std::upper_bound(start_cdf.begin(), start_cdf.end(), u);
    const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - start_cdf.begin()), 1,
                                                  start_cdf.size() - 1);
    const double t = (u - start_cdf[i - 1]) / std::max(start_cdf[i] - start_cdf[i - 1], 1e-300);
    return start_x[i - 1] + t * (start_x[i] - start_x[i - 1]);
  };

  const std::size_t nm = obj.minima.size();
  struct Tally {
    std::vector<std::vector<std::uint64_t>> counts;
    std::vector<std::uint64_t> outside;
    std::vector<std::vector<std::uint64_t>> near;
    std::vector<std::uint64_t> near_any;
  };
  std::vector<Tally> tallies(kChunks);
  const std::size_t per = (cfg.replicas + kChunks - 1) / kChunks;

  parallel_for(kChunks, cfg.threads, [&](std::size_t chunk) {
    Tally& t = tallies[chunk];
    t.counts.assign(cps.size(), std::vector<std::uint64_t>(bins, 0));
    t.outside.assign(cps.size(), 0);
    t.near.assign(cps.size(), std::vector<std::uint64_t>(nm, 0));
    t.near_any.assign(cps.size(), 0);
    const std::size_t r_lo = chunk * per, r_hi = std::min(cfg.replicas, r_lo + per);
    for (std::size_t r = r_lo; r < r_hi; ++r) {
      Stream rng(cfg.seed, r);
      double x = draw_start(rng);
      std::size_t next = 0;
      for (std::size_t i = 1; i <= n_steps; ++i) {
        x = rwmh_step(obj, q, x, gamma_at(i), rng);
        if (i != cps[next]) continue;
        const double pos = (x - lo) / cfg.bin_width;
        if (pos >= 0.0 && pos < static_cast<double>(bins)) ++t.counts[next][static_cast<std::size_t>(pos)];
        else ++t.outside[next];
        bool any = false;
        for (std::size_t m = 0; m < nm; ++m) {
          if (std::abs(x - obj.minima[m]) <= cfg.near_radius) {
            ++t.near[next][m];
            any = true;
          }
        }
        if (any) ++t.near_any[next];
        ++next;
      }
    }
  });

  AnnealResult out;
  const auto m = static_cast<double>(cfg.replicas);
  for (std::size_t c = 0; c < cps.size(); ++c) {
    Checkpoint cp;
    cp.n = cps[c];
    cp.gamma = gamma_at(cps[c]);
    cp.range_lo = lo;
    cp.bin_width = cfg.bin_width;
    cp.counts.assign(bins, 0);
    std::vector<std::uint64_t> near(nm, 0);
    std::uint64_t near_any = 0;
    for (const auto& t : tallies) {
      if (t.counts.empty()) continue;
      for (std::size_t b = 0; b < bins; ++b) cp.counts[b] += t.counts[c][b];
      cp.outside += t.outside[c];
      for (std::size_t k = 0; k < nm; ++k) near[k] += t.near[c][k];
      near_any += t.near_any[c];
    }
    const TargetLaw& pi = laws[c];
    double inside_mass = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      const double a = lo + cfg.bin_width * static_cast<double>(b);
      const double pb = pi.mass(a, a + cfg.bin_width);
      inside_mass += pb;
      cp.tv_estimate += std::abs(static_cast<double>(cp.counts[b]) / m - pb);
      if (pb > 1e-14) {
        const double avg = pb / cfg.bin_width;
        cp.binning_bias += integrate([&](double x) { return std::abs(pi.density(x) - avg); }, a,
                                     a + cfg.bin_width, 1e-12)
                               .value;
      }
    }
    cp.tv_estimate += std::abs(static_cast<double>(cp.outside) / m - std::max(0.0, 1.0 - inside_mass));
    for (std::size_t k = 0; k < nm; ++k) {
      const double p = static_cast<double>(near[k]) / m;
      cp.mass_near.push_back(p);
      cp.mass_near_se.push_back(std::sqrt(p * (1.0 - p) / m));
    }
    cp.mass_near_any = static_cast<double>(near_any) / m;
    out.checkpoints.push_back(std::move(cp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Temperature shift

ShiftBound pi_shift_tv_bound(const Objective& obj, double gamma, double gamma_prime) {
  require(gamma > 0.0, "gamma must be > 0");
  require(gamma_prime >= gamma, "gamma' must be >= gamma");
  ShiftBound out;
  if (gamma_prime == gamma) return out;
  const TargetLaw a(obj, gamma), b(obj, gamma_prime);
  out.bound = 2.0 * std::log(a.Z() / b.Z());
  const double w = std::max(a.half_width(), b.half_width());
  std::vector<double> knots = a.knots();
  knots.insert(knots.end(), b.knots().begin(), b.knots().end());
  std::sort(knots.begin(), knots.end());
  out.exact_tv = integrate_or_throw([&](double x) { return std::abs(a.density(x) - b.density(x)); }, -w, w,
                                    1e-10, knots);
  const double fmin = obj.f_min();
  for (double x : linspace(-w, w, 4001)) {
    const double u = obj.f(x) - fmin;
    if (std::exp(-gamma * u) < std::exp(-gamma_prime * u)) out.hypothesis_holds = false;
  }
  return out;
}

double laplace_Z(const Objective& obj, double gamma) {
  require(gamma > 0.0, "gamma must be > 0");
  require(!obj.minima.empty(), "laplace_Z needs the list of global minima");
  double acc = 0.0;
  for (double m : obj.minima) {
    const double c = obj.d2f(m);
    if (!(c > 0.0)) reject("f'' must be > 0 at every minimum");
    acc += 1.0 / std::sqrt(c);
  }
  return std::sqrt(2.0 * M_PI / gamma) * acc;
}

}  // namespace mcbound::anneal
