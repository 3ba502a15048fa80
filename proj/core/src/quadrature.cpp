#include "mcbound/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mcbound/error.hpp"

namespace mcbound {

namespace {

struct Panel {
  double a;
  double b;
  double value;
  double error;
  double l1;

  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel kronrod_panel(const std::function<double(double)>& fn, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0, l1 = 0.0;
  // max_depth 0: a single 15-point Kronrod panel with its embedded Gauss error estimate.
  const double v = gauss_kronrod<double, 15>::integrate(fn, a, b, 0, 0.0, &err, &l1);
  // Boost reports the single-panel error on the reference interval [-1, 1].
  return {a, b, v, err * 0.5 * (b - a), l1};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& fn, double a, double b, double abs_tol,
                           std::span<const double> breakpoints, unsigned max_panels) {
  std::vector<double> knots{a};
  for (double p : breakpoints)
    if (p > a && p < b) knots.push_back(p);
  knots.push_back(b);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  // Globally adaptive bisection: always split the panel with the largest error.
  std::priority_queue<Panel> heap;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) heap.push(kronrod_panel(fn, knots[i], knots[i + 1]));
  const auto totals = [&heap] {
    auto copy = heap;
    double err = 0.0, l1 = 0.0;
    while (!copy.empty()) {
      err += copy.top().error;
      l1 += copy.top().l1;
      copy.pop();
    }
    return std::pair{err, l1};
  };
  auto [err, l1] = totals();
  const auto floor = [&] { return std::max(abs_tol, 1e-14 * l1); };
  while (err > floor() && heap.size() < max_panels) {
    const Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;
    heap.pop();
    const Panel left = kronrod_panel(fn, worst.a, mid);
    const Panel right = kronrod_panel(fn, mid, worst.b);
    err += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    heap.push(left);
    heap.push(right);
    if (err <= floor()) std::tie(err, l1) = totals();
  }
  std::tie(err, l1) = totals();

  QuadratureResult out;
  std::vector<Panel> panels;
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  // Sum in left-to-right order so results do not depend on heap layout.
  std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  for (const auto& p : panels) out.value += p.value;
  out.error_estimate = err;
  // Below ~1e-14 relative the estimate is dominated by rounding, not truncation.
  out.converged = err <= floor() && std::isfinite(out.value);
  return out;
}

double integrate_or_throw(const std::function<double(double)>& fn, double a, double b, double abs_tol,
                          std::span<const double> breakpoints) {
  const auto r = integrate(fn, a, b, abs_tol, breakpoints);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b << "] did not reach tolerance " << abs_tol << " (achieved "
        << r.error_estimate << ")";
    throw Degenerate(msg.str());
  }
  return r.value;
}

}  // namespace mcbound
