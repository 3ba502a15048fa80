#include "mcbound/ar_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "mcbound/bounds.hpp"
#include "mcbound/error.hpp"
#include "mcbound/parallel.hpp"
#include "mcbound/quadrature.hpp"

namespace mcbound::ar {

using detail::reject;
using detail::require;

namespace {

double parse_parameter(const std::string& spec, const std::string& prefix) {
  if (spec.rfind(prefix, 0) != 0) reject("unrecognised specification '" + spec + "'");
  const std::string tail = spec.substr(prefix.size());
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tail, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != tail.size()) reject("malformed numeric parameter in '" + spec + "'");
  return v;
}

// Fixed number of work chunks so Monte Carlo reductions do not depend on thread count.
constexpr std::size_t kChunks = 64;

}  // namespace

// ---------------------------------------------------------------------------
// Noise densities and maps

NoiseDensity NoiseDensity::gaussian(double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), "gaussian sigma must be > 0");
  NoiseDensity q;
  std::ostringstream name;
  name.precision(17);
  name << "gauss:" << sigma;
  q.name = name.str();
  q.pdf = [sigma](double z) {
    const double t = z / sigma;
    return std::exp(-0.5 * t * t) / (sigma * std::sqrt(2.0 * M_PI));
  };
  q.cdf = [sigma](double z) { return 0.5 * std::erfc(-z / (sigma * M_SQRT2)); };
  q.sample = [sigma](Stream& rng) { return rng.normal(0.0, sigma); };
  q.symmetric_unimodal = true;
  q.effective_halfwidth = 12.0 * sigma;
  return q;
}

NoiseDensity NoiseDensity::logistic(double scale) {
  require(scale > 0.0 && std::isfinite(scale), "logistic scale must be > 0");
  NoiseDensity q;
  std::ostringstream name;
  name.precision(17);
  name << "logistic:" << scale;
  q.name = name.str();
  q.pdf = [scale](double z) {
    const double e = std::exp(-std::abs(z) / scale);
    return e / (scale * (1.0 + e) * (1.0 + e));
  };
  q.cdf = [scale](double z) { return 1.0 / (1.0 + std::exp(-z / scale)); };
  q.sample = [scale](Stream& rng) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    return scale * std::log(u / (1.0 - u));
  };
  q.symmetric_unimodal = true;
  q.effective_halfwidth = 40.0 * scale;
  return q;
}

NoiseDensity NoiseDensity::tabulated(std::vector<double> x, std::vector<double> p, bool symmetric_unimodal) {
  require(x.size() >= 2 && x.size() == p.size(), "tabulated density needs >= 2 matching (x, p) points");
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(std::isfinite(x[i]) && std::isfinite(p[i]) && p[i] >= 0.0, "tabulated density values must be finite and >= 0");
    if (i > 0) require(x[i] > x[i - 1], "tabulated abscissae must be strictly increasing");
  }
  std::vector<double> cum(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) cum[i] = cum[i - 1] + 0.5 * (p[i] + p[i - 1]) * (x[i] - x[i - 1]);
  const double mass = cum.back();
  require(mass > 0.0, "tabulated density has zero mass");
  for (auto& v : p) v /= mass;
  for (auto& v : cum) v /= mass;

  struct Table {
    std::vector<double> x, p, cum;
    std::size_t cell(double z) const {
      const auto it = std::upper_bound(x.begin(), x.end(), z);
      return static_cast<std::size_t>(it - x.begin()) - 1;
    }
    double pdf(double z) const {
      if (z < x.front() || z > x.back()) return 0.0;
      const std::size_t i = std::min(cell(z), x.size() - 2);
      const double t = (z - x[i]) / (x[i + 1] - x[i]);
      return p[i] + t * (p[i + 1] - p[i]);
    }
    double cdf(double z) const {
      if (z <= x.front()) return 0.0;
      if (z >= x.back()) return 1.0;
      const std::size_t i = cell(z);
      const double h = z - x[i];
      return cum[i] + h * (p[i] + 0.5 * (pdf(z) - p[i]));
    }
  };
  const auto table = std::make_shared<Table>(Table{std::move(x), std::move(p), std::move(cum)});

  NoiseDensity q;
  q.name = "tabulated";
  q.pdf = [table](double z) { return table->pdf(z); };
  q.cdf = [table](double z) { return table->cdf(z); };
  q.sample = [table](Stream& rng) {
    const double u = rng.uniform();
    double lo = table->x.front(), hi = table->x.back();
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (table->cdf(mid) < u) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  q.symmetric_unimodal = symmetric_unimodal;
  q.effective_halfwidth = std::max(std::abs(table->x.front()), std::abs(table->x.back()));
  return q;
}

NoiseDensity NoiseDensity::parse(const std::string& spec) {
  if (spec.rfind("gauss:", 0) == 0) return gaussian(parse_parameter(spec, "gauss:"));
  if (spec.rfind("logistic:", 0) == 0) return logistic(parse_parameter(spec, "logistic:"));
  reject("noise must be 'gauss:sigma' or 'logistic:scale', got '" + spec + "'");
}

MapFunction MapFunction::linear(double a) {
  require(std::isfinite(a), "map coefficient must be finite");
  std::ostringstream name;
  name.precision(17);
  name << "linear:" << a;
  return {name.str(), [a](double x) { return a * x; }, std::abs(a)};
}

MapFunction MapFunction::tanh(double a) {
  require(std::isfinite(a), "map coefficient must be finite");
  std::ostringstream name;
  name.precision(17);
  name << "tanh:" << a;
  return {name.str(), [a](double x) { return std::tanh(a * x); }, std::abs(a)};
}

MapFunction MapFunction::parse(const std::string& spec) {
  if (spec.rfind("linear:", 0) == 0) return linear(parse_parameter(spec, "linear:"));
  if (spec.rfind("tanh:", 0) == 0) return tanh(parse_parameter(spec, "tanh:"));
  reject("map must be 'linear:a' or 'tanh:a', got '" + spec + "'");
}

void ARModel::validate() const {
  require(static_cast<bool>(g.g), "model map g is missing");
  require(q.pdf && q.cdf && q.sample, "noise density is incomplete");
  require(L() >= 0.0 && L() < 1.0, "Lipschitz constant L must lie in [0,1)");
  require(lambda > L() && lambda < 1.0, "lambda must satisfy L < lambda < 1");
  require(delta > 0.0 && std::isfinite(delta), "delta must be > 0");
  const double w = q.effective_halfwidth;
  const auto mass = integrate(q.pdf, -w, w, 1e-10, std::vector<double>{0.0});
  if (!mass.converged || std::abs(mass.value - 1.0) > 1e-8) {
    std::ostringstream msg;
    msg << "noise density must integrate to 1 within 1e-8 (got " << mass.value << ")";
    reject(msg.str());
  }
}

void ARModel::require_bound_delta() const {
  const double threshold = (1.0 - lambda) / (lambda - L());
  if (!(delta > threshold)) {
    std::ostringstream msg;
    msg << "delta > (1 - lambda)/(lambda - L) violated: delta = " << delta << ", threshold = " << threshold;
    reject(msg.str());
  }
}

// ---------------------------------------------------------------------------
// eps(delta)

double overlap_at_shift(const NoiseDensity& q, double u) {
  u = std::abs(u);
  if (u == 0.0) return 1.0;
  const double w = q.effective_halfwidth;
  const std::vector<double> knots{0.0, 0.5 * u, u};
  const auto r = integrate([&](double z) { return std::abs(q.pdf(z - u) - q.pdf(z)); }, -w, u + w, 1e-10,
                           knots);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "overlap quadrature did not converge (achieved " << r.error_estimate << ")";
    throw Degenerate(msg.str());
  }
  return std::clamp(1.0 - 0.5 * r.value, 0.0, 1.0);
}

double overlap_closed_form(const NoiseDensity& q, double u) {
  require(q.symmetric_unimodal, "closed-form overlap needs a symmetric unimodal density");
  return 2.0 * q.cdf(-0.5 * std::abs(u));
}

EpsDeltaReport eps_delta_report(const ARModel& m, std::size_t grid_points) {
  require(m.delta > 0.0, "delta must be > 0");
  const double umax = m.L() * m.delta;
  EpsDeltaReport out;
  if (m.q.symmetric_unimodal) {
    out.worst_shift = umax;
    out.quadrature = overlap_at_shift(m.q, umax);
    out.closed_form = overlap_closed_form(m.q, umax);
    if (std::abs(out.quadrature - out.closed_form) > 1e-6) {
      std::ostringstream msg;
      msg << "eps(delta) quadrature " << out.quadrature << " disagrees with closed form " << out.closed_form;
      throw Degenerate(msg.str());
    }
    out.epsilon = out.quadrature;
    return out;
  }
  require(grid_points >= 2, "shift grid needs >= 2 points");
  out.closed_form = std::numeric_limits<double>::quiet_NaN();
  out.quadrature = 1.0;
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double u = umax * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    const double v = overlap_at_shift(m.q, u);
    if (v < out.quadrature) {
      out.quadrature = v;
      out.worst_shift = u;
    }
  }
  out.epsilon = out.quadrature;
  return out;
}

double eps_delta(const ARModel& m) { return eps_delta_report(m).epsilon; }

double ar_B(const ARModel& m, double epsilon) {
  return std::max(1.0, (1.0 + m.L() * m.delta - epsilon) / m.lambda);
}

double ar_bound(const ARModel& m, double epsilon, std::size_t n, std::size_t j, double cross_moment) {
  m.require_bound_delta();
  require(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0,1]");
  require(cross_moment >= 1.0, "cross_moment must be >= 1");
  const bounds::HomogeneousBoundInput in{epsilon, m.lambda, 0.0, ar_B(m, epsilon), cross_moment};
  return bounds::bound_tv_homog(in, n, j);
}

double ar_bound(const ARModel& m, std::size_t n, std::size_t j, double cross_moment) {
  return ar_bound(m, eps_delta(m), n, j, cross_moment);
}

// ---------------------------------------------------------------------------
// Coupled sampler

ARCoupling::ARCoupling(ARModel model) : model_(std::move(model)), epsilon_(0.0) {
  model_.validate();
  epsilon_ = eps_delta(model_);
}

ARCoupling::ARCoupling(ARModel model, double epsilon) : model_(std::move(model)), epsilon_(epsilon) {
  model_.validate();
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0,1]");
}

double ARCoupling::step(double x, Stream& rng) const { return model_.g.g(x) + model_.q.sample(rng); }

double ARCoupling::sample_nu(double m1, double m2, Stream& rng) const {
  const auto& q = model_.q;
  for (std::size_t it = 0; it < kMaxAcceptReject; ++it) {
    const double y = (rng.uniform() < 0.5 ? m1 : m2) + q.sample(rng);
    const double a = q.pdf(y - m1), b = q.pdf(y - m2);
    const double mix = 0.5 * (a + b);
    if (mix > 0.0 && rng.uniform() * mix < std::min(a, b)) return y;
  }
  throw Degenerate("accept-reject for the overlap measure exceeded the iteration cap");
}

double ARCoupling::sample_residual(double own, double other, double overlap, Stream& rng) const {
  const auto& q = model_.q;
  for (std::size_t it = 0; it < kMaxAcceptReject; ++it) {
    const double y = own + q.sample(rng);
    const double a = q.pdf(y - own);
    if (a <= 0.0) continue;
    const double accept = 1.0 - epsilon_ * std::min(a, q.pdf(y - other)) / (overlap * a);
    if (rng.uniform() < accept) return y;
  }
  throw Degenerate("accept-reject for the residual kernel exceeded the iteration cap");
}

ARState ARCoupling::coupled_step(const ARState& s, Stream& rng) const {
  const auto& g = model_.g.g;
  if (s.bell) {
    const double y = step(s.x, rng);
    return {y, y, true};
  }
  const double m1 = g(s.x), m2 = g(s.x_prime);
  if (std::abs(s.x - s.x_prime) <= model_.delta) {
    if (epsilon_ >= 1.0 || rng.bernoulli(epsilon_)) {
      const double y = sample_nu(m1, m2, rng);
      return {y, y, true};
    }
    const double shift = std::abs(m1 - m2);
    const double overlap =
        model_.q.symmetric_unimodal ? overlap_closed_form(model_.q, shift) : overlap_at_shift(model_.q, shift);
    const double y = sample_residual(m1, m2, overlap, rng);
    const double yp = sample_residual(m2, m1, overlap, rng);
    return {y, yp, false};
  }
  const double z = model_.q.sample(rng);
  return {m1 + z, m2 + z, false};
}

// ---------------------------------------------------------------------------
// Monte Carlo runs

coupling::CouplingRunResult run_ar_coupling(const ARCoupling& c, const ARRunConfig& cfg) {
  require(cfg.replicas >= 1, "replica count must be >= 1");
  std::vector<std::uint32_t> times(cfg.replicas, 0);
  parallel_for(cfg.replicas, cfg.threads, [&](std::size_t r) {
    Stream rng(cfg.seed, r);
    ARState s{cfg.x0, cfg.x0_prime, false};
    for (std::size_t k = 1; k <= cfg.horizon; ++k) {
      s = c.coupled_step(s, rng);
      if (s.bell) {
        times[r] = static_cast<std::uint32_t>(k);
        break;
      }
    }
  });
  return coupling::summarize_coupling_times(times, cfg.horizon);
}

ThresholdLowerBound threshold_tv_lower_bound(const ARCoupling& c, const ARRunConfig& cfg,
                                             const std::vector<double>& thresholds) {
  require(cfg.replicas >= 2, "replica count must be >= 2");
  require(!thresholds.empty(), "at least one threshold is needed");
  const std::size_t H = cfg.horizon, T = thresholds.size();
  const std::size_t cells = (H + 1) * T;
  std::vector<std::vector<double>> sum(kChunks, std::vector<double>(cells, 0.0));
  std::vector<std::vector<double>> sum_sq(kChunks, std::vector<double>(cells, 0.0));
  const std::size_t per = (cfg.replicas + kChunks - 1) / kChunks;

  parallel_for(kChunks, cfg.threads, [&](std::size_t chunk) {
    auto& s1 = sum[chunk];
    auto& s2 = sum_sq[chunk];
    const std::size_t lo = chunk * per, hi = std::min(cfg.replicas, lo + per);
    for (std::size_t r = lo; r < hi; ++r) {
      Stream rng(cfg.seed, r);
      ARState s{cfg.x0, cfg.x0_prime, false};
      for (std::size_t n = 0; n <= H; ++n) {
        if (n > 0) s = c.coupled_step(s, rng);
        if (s.bell) continue;  // both indicators agree from here on
        for (std::size_t t = 0; t < T; ++t) {
          const double d = (s.x <= thresholds[t] ? 1.0 : 0.0) - (s.x_prime <= thresholds[t] ? 1.0 : 0.0);
          s1[n * T + t] += d;
          s2[n * T + t] += d * d;
        }
      }
    }
  });

  const auto m = static_cast<double>(cfg.replicas);
  ThresholdLowerBound out;
  out.lower.assign(H + 1, 0.0);
  for (std::size_t n = 0; n <= H; ++n) {
    for (std::size_t t = 0; t < T; ++t) {
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < kChunks; ++k) {
        a += sum[k][n * T + t];
        b += sum_sq[k][n * T + t];
      }
      const double mean = a / m;
      const double var = std::max(0.0, (b / m - mean * mean) * m / (m - 1.0));
      const double se = std::sqrt(var / m);
      out.lower[n] = std::max(out.lower[n], 2.0 * (std::abs(mean) - 3.0 * se));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discretization

FiniteKernel discretize(const ARModel& m, double lo, double hi, std::size_t points) {
  require(points >= 2 && hi > lo, "discretization needs hi > lo and >= 2 points");
  const double h = (hi - lo) / static_cast<double>(points - 1);
  const auto n = static_cast<Eigen::Index>(points);
  Eigen::MatrixXd rows(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double gx = m.g.g(lo + h * static_cast<double>(i));
    for (Eigen::Index j = 0; j < n; ++j) rows(i, j) = m.q.pdf(lo + h * static_cast<double>(j) - gx);
    const double total = rows.row(i).sum();
    if (!(total > 0.0)) throw Degenerate("discretized row has no mass on the grid");
    rows.row(i) /= total;
  }
  return FiniteKernel(std::move(rows));
}

Measure grid_point_mass(double lo, double hi, std::size_t points, double x) {
  require(points >= 2 && hi > lo && x >= lo && x <= hi, "point must lie on the grid range");
  const double h = (hi - lo) / static_cast<double>(points - 1);
  const auto idx = static_cast<Eigen::Index>(std::llround((x - lo) / h));
  Measure out = Measure::Zero(static_cast<Eigen::Index>(points));
  out(idx) = 1.0;
  return out;
}

}  // namespace mcbound::ar
