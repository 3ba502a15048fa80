#include "mcbound/chain_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "mcbound/error.hpp"

namespace mcbound {

using detail::reject;
using detail::require;

namespace {

std::vector<std::string> default_labels(std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

void check_dim(const Eigen::VectorXd& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    std::ostringstream msg;
    msg << what << " has dimension " << v.size() << ", expected " << n;
    reject(msg.str());
  }
}

Eigen::VectorXd clamp_row(Eigen::VectorXd row, const char* what) {
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (row(i) < 0.0) {
      if (row(i) < -kStochasticTolerance) {
        std::ostringstream msg;
        msg << what << " has negative mass " << row(i) << " at state " << i;
        reject(msg.str());
      }
      row(i) = 0.0;
    }
  }
  return row;
}

}  // namespace

// ---------------------------------------------------------------------------
// FiniteKernel

FiniteKernel::FiniteKernel(std::vector<std::string> states, Eigen::MatrixXd rows)
    : states_(std::move(states)), rows_(std::move(rows)) {
  if (states_.empty()) states_ = default_labels(static_cast<std::size_t>(rows_.rows()));
  const auto n = static_cast<Eigen::Index>(states_.size());
  require(n > 0, "kernel must have at least one state");
  require(rows_.rows() == n && rows_.cols() == n,
          "kernel must be square with one row per state");
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      if (!(rows_(x, y) >= 0.0) || !std::isfinite(rows_(x, y))) {
        std::ostringstream msg;
        msg << "kernel entry (" << x << ", " << y << ") = " << rows_(x, y) << " is not a probability";
        reject(msg.str());
      }
    }
    const double s = rows_.row(x).sum();
    if (std::abs(s - 1.0) > kStochasticTolerance) {
      std::ostringstream msg;
      msg << "kernel row " << x << " sums to " << s << ", not 1";
      reject(msg.str());
    }
  }
}

FiniteKernel::FiniteKernel(Eigen::MatrixXd rows) : FiniteKernel({}, std::move(rows)) {}

FiniteKernel FiniteKernel::from_rows(const std::vector<std::vector<double>>& rows,
                                     std::vector<std::string> states) {
  const std::size_t n = rows.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    require(rows[i].size() == n, "kernel must be square with one row per state");
    for (std::size_t j = 0; j < n; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  if (states.empty()) states = default_labels(n);
  return FiniteKernel(std::move(states), std::move(m));
}

Eigen::VectorXd FiniteKernel::apply(const Eigen::VectorXd& h) const {
  check_dim(h, size(), "function");
  return rows_ * h;
}

// ---------------------------------------------------------------------------
// WeightFunction

WeightFunction::WeightFunction(Eigen::VectorXd values) : values_(std::move(values)) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!(values_(i) >= 1.0) || !std::isfinite(values_(i))) {
      std::ostringstream msg;
      msg << "weight function must be >= 1 everywhere; value " << values_(i) << " at state " << i;
      reject(msg.str());
    }
  }
}

WeightFunction WeightFunction::constant(std::size_t n, double value) {
  return WeightFunction(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), value));
}

// ---------------------------------------------------------------------------
// ProductKernel

ProductKernel::ProductKernel(std::size_t base_size, FiniteKernel kernel)
    : base_(base_size), kernel_(std::move(kernel)) {
  require(kernel_.size() == base_ * base_, "product kernel must act on base_size^2 pair states");
}

Eigen::MatrixXd ProductKernel::joint_row(std::size_t x, std::size_t xp) const {
  const auto n = static_cast<Eigen::Index>(base_);
  Eigen::MatrixXd out(n, n);
  const auto idx = static_cast<Eigen::Index>(index(x, xp));
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index yp = 0; yp < n; ++yp) out(y, yp) = kernel_.matrix()(idx, y * n + yp);
  return out;
}

// ---------------------------------------------------------------------------
// MinorizationCertificate

MinorizationCertificate::MinorizationCertificate(std::size_t base_size, std::vector<StatePair> pairs,
                                                 std::vector<Eigen::VectorXd> nu, double epsilon)
    : base_(base_size),
      pairs_(std::move(pairs)),
      nu_(std::move(nu)),
      epsilon_(epsilon),
      slot_of_(base_size * base_size, -1) {
  require(!pairs_.empty(), "coupling set must be nonempty");
  require(nu_.size() == pairs_.size(), "one minorizing measure per coupling pair is required");
  require(epsilon_ >= 0.0 && epsilon_ <= 1.0, "epsilon must lie in [0, 1]");
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const auto [x, xp] = pairs_[k];
    require(x < base_ && xp < base_, "coupling pair refers to a state outside the space");
    check_dim(nu_[k], base_, "minorizing measure");
    if (epsilon_ > 0.0) {
      require((nu_[k].array() >= -kStochasticTolerance).all(), "minorizing measure must be nonnegative");
      require(std::abs(nu_[k].sum() - 1.0) <= kStochasticTolerance, "minorizing measure must sum to 1");
    }
    auto& s = slot_of_[x * base_ + xp];
    require(s < 0, "coupling set lists a pair twice");
    s = static_cast<long>(k);
  }
}

std::optional<std::size_t> MinorizationCertificate::slot(std::size_t x, std::size_t xp) const {
  if (x >= base_ || xp >= base_) return std::nullopt;
  const long s = slot_of_[x * base_ + xp];
  if (s < 0) return std::nullopt;
  return static_cast<std::size_t>(s);
}

StateSet MinorizationCertificate::product_mask() const {
  StateSet mask(base_ * base_, false);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = slot_of_[i] >= 0;
  return mask;
}

MinorizationCertificate MinorizationCertificate::with_epsilon(double epsilon) const {
  require(epsilon >= 0.0 && epsilon <= epsilon_, "a weakened certificate needs 0 <= epsilon <= original");
  return MinorizationCertificate(base_, pairs_, nu_, epsilon);
}

// ---------------------------------------------------------------------------
// Norms and propagation

Measure propagate(const Measure& xi, const FiniteKernel& kernel, std::size_t n) {
  check_dim(xi, kernel.size(), "measure");
  Measure out = xi;
  const Eigen::MatrixXd pt = kernel.matrix().transpose();
  for (std::size_t k = 0; k < n; ++k) out = pt * out;
  return out;
}

double f_norm(const Measure& mu, const WeightFunction& f) {
  check_dim(mu, f.size(), "measure");
  return (f.values().array() * mu.array().abs()).sum();
}

double tv_norm(const Measure& mu) { return mu.array().abs().sum(); }

// ---------------------------------------------------------------------------
// Stationary law

namespace {

std::vector<bool> reach(const Eigen::MatrixXd& m, bool forward) {
  const auto n = m.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::deque<Eigen::Index> todo{0};
  seen[0] = true;
  while (!todo.empty()) {
    const auto x = todo.front();
    todo.pop_front();
    for (Eigen::Index y = 0; y < n; ++y) {
      const double w = forward ? m(x, y) : m(y, x);
      if (w > 0.0 && !seen[static_cast<std::size_t>(y)]) {
        seen[static_cast<std::size_t>(y)] = true;
        todo.push_back(y);
      }
    }
  }
  return seen;
}

double stationarity_residual(const Measure& pi, const Eigen::MatrixXd& pt) {
  return (pt * pi - pi).lpNorm<1>();
}

}  // namespace

bool is_irreducible(const FiniteKernel& kernel) {
  const auto fwd = reach(kernel.matrix(), true);
  const auto bwd = reach(kernel.matrix(), false);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

Measure stationary(const FiniteKernel& kernel) {
  if (!is_irreducible(kernel))
    throw Degenerate("kernel is reducible; the stationary law is not unique");
  constexpr double tol = 1e-12;
  const auto n = static_cast<Eigen::Index>(kernel.size());
  const Eigen::MatrixXd pt = kernel.matrix().transpose();

  // (P^T - I) pi = 0 together with sum(pi) = 1, solved in the least-squares sense.
  Eigen::MatrixXd a(n + 1, n);
  a.topRows(n) = pt - Eigen::MatrixXd::Identity(n, n);
  a.row(n).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs(n) = 1.0;
  Measure pi = a.colPivHouseholderQr().solve(rhs);
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();

  // Lazy power iteration polishes the direct solve when it is not tight enough.
  const Eigen::MatrixXd lazy = 0.5 * (pt + Eigen::MatrixXd::Identity(n, n));
  for (int it = 0; it < 1'000'000 && stationarity_residual(pi, pt) > tol; ++it) {
    pi = lazy * pi;
    pi /= pi.sum();
  }
  if (stationarity_residual(pi, pt) > tol)
    throw Degenerate("stationary solve did not reach the 1e-12 l1 tolerance");
  return pi;
}

// ---------------------------------------------------------------------------
// Minorization

MinorizationCertificate extract_minorization(const FiniteKernel& kernel,
                                             const std::vector<StatePair>& pairs) {
  require(!pairs.empty(), "coupling set must be nonempty");
  const auto& p = kernel.matrix();
  const auto n = static_cast<Eigen::Index>(kernel.size());
  std::vector<Eigen::VectorXd> nus;
  nus.reserve(pairs.size());
  double eps = 1.0;
  for (const auto& [x, xp] : pairs) {
    require(x < kernel.size() && xp < kernel.size(), "coupling pair refers to a state outside the space");
    Eigen::VectorXd m = p.row(static_cast<Eigen::Index>(x))
                            .cwiseMin(p.row(static_cast<Eigen::Index>(xp)))
                            .transpose();
    double overlap = m.sum();
    if (overlap > 1.0 - kStochasticTolerance) overlap = 1.0;
    eps = std::min(eps, overlap);
    if (overlap > 0.0)
      nus.emplace_back(m / overlap);
    else
      nus.emplace_back(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  }
  return MinorizationCertificate(kernel.size(), pairs, std::move(nus), std::max(eps, 0.0));
}

MinorizationCertificate small_set_certificate(const FiniteKernel& kernel, const StateSet& set) {
  require(set.size() == kernel.size(), "state set size must match the kernel");
  const auto n = static_cast<Eigen::Index>(kernel.size());
  Eigen::VectorXd m = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  bool any = false;
  for (Eigen::Index x = 0; x < n; ++x) {
    if (!set[static_cast<std::size_t>(x)]) continue;
    any = true;
    m = m.cwiseMin(kernel.matrix().row(x).transpose());
  }
  require(any, "small set must be nonempty");
  const double eps = m.sum();
  Eigen::VectorXd nu = eps > 0.0 ? Eigen::VectorXd(m / eps)
                                 : Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const auto pairs = square_pairs(set);
  return MinorizationCertificate(kernel.size(), pairs, std::vector<Eigen::VectorXd>(pairs.size(), nu),
                                 eps);
}

void validate_certificate(const FiniteKernel& kernel, const MinorizationCertificate& cert, double tol) {
  require(cert.base_size() == kernel.size(), "certificate and kernel disagree on the state count");
  const auto& p = kernel.matrix();
  const auto n = static_cast<Eigen::Index>(kernel.size());
  for (std::size_t k = 0; k < cert.pairs().size(); ++k) {
    const auto [x, xp] = cert.pairs()[k];
    for (Eigen::Index y = 0; y < n; ++y) {
      const double lhs = std::min(p(static_cast<Eigen::Index>(x), y), p(static_cast<Eigen::Index>(xp), y));
      if (lhs < cert.epsilon() * cert.nu()[k](y) - tol) {
        std::ostringstream msg;
        msg << "certificate invalid: pair (" << x << ", " << xp << ") at state " << y << ": overlap "
            << lhs << " < epsilon * nu = " << cert.epsilon() * cert.nu()[k](y);
        reject(msg.str());
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Drift

DriftCheck verify_drift(const FiniteKernel& kernel, const WeightFunction& v, const StateSet& set) {
  require(v.size() == kernel.size(), "drift function size must match the kernel");
  require(set.size() == kernel.size(), "state set size must match the kernel");
  const Eigen::VectorXd kv = kernel.apply(v.values());
  DriftCheck out;
  bool any_off = false;
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    if (set[x]) continue;
    any_off = true;
    out.lambda_min = std::max(out.lambda_min, kv(static_cast<Eigen::Index>(x)) / v[x]);
  }
  if (!any_off) {
    out.vacuous = true;
    out.lambda_min = 0.0;
    out.b_min = kv.maxCoeff();
    return out;
  }
  if (out.lambda_min >= 1.0) {
    out.violation = true;
    out.b_min = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.b_min = drift_b_for(kernel, v, set, out.lambda_min);
  return out;
}

double drift_b_for(const FiniteKernel& kernel, const WeightFunction& v, const StateSet& set,
                   double lambda) {
  require(v.size() == kernel.size() && set.size() == kernel.size(), "drift inputs must match the kernel");
  const Eigen::VectorXd kv = kernel.apply(v.values());
  double b = 0.0;
  for (std::size_t x = 0; x < kernel.size(); ++x)
    if (set[x]) b = std::max(b, kv(static_cast<Eigen::Index>(x)) - lambda * v[x]);
  return b;
}

bool drift_holds(const FiniteKernel& kernel, const WeightFunction& v, const StateSet& set,
                 double lambda, double b, double tol) {
  require(v.size() == kernel.size() && set.size() == kernel.size(), "drift inputs must match the kernel");
  const Eigen::VectorXd kv = kernel.apply(v.values());
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    const double rhs = lambda * v[x] + (set[x] ? b : 0.0);
    if (kv(static_cast<Eigen::Index>(x)) > rhs + tol) return false;
  }
  return true;
}

bool DriftCertificate::holds(const FiniteKernel& kernel, double tol) const {
  return drift_holds(kernel, vbar, set, lambda, b, tol);
}

// ---------------------------------------------------------------------------
// Product kernels

Eigen::VectorXd residual_row(const FiniteKernel& kernel, const MinorizationCertificate& cert,
                             std::size_t slot, std::size_t which, double epsilon) {
  if (epsilon >= 1.0) throw Degenerate("epsilon = 1: the residual kernel is undefined");
  Eigen::VectorXd r = (kernel.row(which) - epsilon * cert.nu()[slot]) / (1.0 - epsilon);
  return clamp_row(std::move(r), "residual row");
}

ProductKernel build_product_pstar(const FiniteKernel& kernel, const MinorizationCertificate& cert) {
  return build_product_pstar(kernel, cert, cert.epsilon());
}

ProductKernel build_product_pstar(const FiniteKernel& kernel, const MinorizationCertificate& cert,
                                  double epsilon) {
  require(cert.base_size() == kernel.size(), "certificate and kernel disagree on the state count");
  if (epsilon >= 1.0) throw Degenerate("epsilon = 1: the residual kernel is undefined");
  require(epsilon >= 0.0 && epsilon <= cert.epsilon(), "epsilon must lie in [0, certificate epsilon]");
  const auto& p = kernel.matrix();
  const std::size_t n = kernel.size();
  const auto nn = static_cast<Eigen::Index>(n * n);

  // Each pair's own overlap must cover the certified epsilon.
  for (const auto& [x, xp] : cert.pairs()) {
    const double overlap =
        p.row(static_cast<Eigen::Index>(x)).cwiseMin(p.row(static_cast<Eigen::Index>(xp))).sum();
    if (overlap < cert.epsilon() - kStochasticTolerance) {
      std::ostringstream msg;
      msg << "certificate invalid: pair (" << x << ", " << xp << ") has overlap " << overlap
          << " < epsilon " << cert.epsilon();
      reject(msg.str());
    }
  }

  Eigen::MatrixXd star(nn, nn);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t xp = 0; xp < n; ++xp) {
      Eigen::VectorXd a, c;
      if (auto s = cert.slot(x, xp)) {
        a = residual_row(kernel, cert, *s, x, epsilon);
        c = residual_row(kernel, cert, *s, xp, epsilon);
      } else {
        a = kernel.row(x);
        c = kernel.row(xp);
      }
      const auto row = static_cast<Eigen::Index>(x * n + xp);
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t yp = 0; yp < n; ++yp)
          star(row, static_cast<Eigen::Index>(y * n + yp)) =
              a(static_cast<Eigen::Index>(y)) * c(static_cast<Eigen::Index>(yp));
    }
  }
  // Rows of products of (near-)stochastic vectors: renormalise away clamp residue.
  for (Eigen::Index r = 0; r < nn; ++r) star.row(r) /= star.row(r).sum();

  std::vector<std::string> labels;
  labels.reserve(n * n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t xp = 0; xp < n; ++xp)
      labels.push_back("(" + kernel.states()[x] + "," + kernel.states()[xp] + ")");
  return ProductKernel(n, FiniteKernel(std::move(labels), std::move(star)));
}

ProductKernel independent_product(const FiniteKernel& kernel) {
  const std::size_t n = kernel.size();
  Eigen::MatrixXd prod(static_cast<Eigen::Index>(n * n), static_cast<Eigen::Index>(n * n));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t xp = 0; xp < n; ++xp)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t yp = 0; yp < n; ++yp)
          prod(static_cast<Eigen::Index>(x * n + xp), static_cast<Eigen::Index>(y * n + yp)) =
              kernel(x, y) * kernel(xp, yp);
  return ProductKernel(n, FiniteKernel(std::move(prod)));
}

WeightFunction pair_average(const WeightFunction& v) {
  const std::size_t n = v.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n * n));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t xp = 0; xp < n; ++xp)
      out(static_cast<Eigen::Index>(x * n + xp)) = 0.5 * (v[x] + v[xp]);
  return WeightFunction(std::move(out));
}

StateSet level_set(const WeightFunction& v, double level) {
  StateSet out(v.size());
  for (std::size_t x = 0; x < v.size(); ++x) out[x] = v[x] <= level;
  return out;
}

std::vector<StatePair> square_pairs(const StateSet& set) {
  std::vector<StatePair> out;
  for (std::size_t x = 0; x < set.size(); ++x)
    for (std::size_t xp = 0; xp < set.size(); ++xp)
      if (set[x] && set[xp]) out.emplace_back(x, xp);
  return out;
}

// ---------------------------------------------------------------------------
// Certified constants

HomogeneousConstants certify_homogeneous(const FiniteKernel& kernel, const MinorizationCertificate& cert,
                                         const WeightFunction& vbar, double vacuous_lambda) {
  const std::size_t n = kernel.size();
  require(vbar.size() == n * n, "pair drift function must live on the product space");
  if (cert.degenerate()) throw Degenerate("coupling set has a pair with zero overlap");
  const ProductKernel star = build_product_pstar(kernel, cert);
  const StateSet mask = cert.product_mask();

  HomogeneousConstants out;
  out.epsilon = cert.epsilon();
  const DriftCheck drift = verify_drift(star.kernel(), vbar, mask);
  if (drift.violation) throw Degenerate("no geometric drift of the pair function off the coupling set");
  out.vacuous = drift.vacuous;
  out.lambda = drift.vacuous ? vacuous_lambda : drift.lambda_min;
  require(out.lambda > 0.0 && out.lambda < 1.0, "drift rate must lie in (0,1)");
  out.b = drift_b_for(star.kernel(), vbar, mask, out.lambda);

  const Eigen::VectorXd rv = star.kernel().apply(vbar.values());
  out.sup_residual_v = 0.0;
  out.M = 0.0;
  for (std::size_t k = 0; k < cert.pairs().size(); ++k) {
    const auto [x, xp] = cert.pairs()[k];
    const double r = rv(static_cast<Eigen::Index>(x * n + xp));
    double diag = 0.0;
    for (std::size_t y = 0; y < n; ++y)
      diag += cert.nu()[k](static_cast<Eigen::Index>(y)) * vbar[y * n + y];
    out.sup_residual_v = std::max(out.sup_residual_v, r);
    out.M = std::max(out.M, (1.0 - out.epsilon) * r + out.epsilon * diag);
  }
  out.B = std::max(1.0, (1.0 - out.epsilon) / out.lambda * out.sup_residual_v);
  return out;
}

}  // namespace mcbound
