#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mcbound {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool converged = true;
};

/// Globally adaptive Gauss–Kronrod (15-point) integration of `fn` over [a, b].
///
/// `breakpoints` are interior points where the integrand may have kinks; the
/// interval is split there first. Convergence is declared when the summed
/// error estimate drops below `abs_tol`, or below the rounding floor of
/// 1e-14 times the L1 norm, within `max_panels` panels.
QuadratureResult integrate(const std::function<double(double)>& fn, double a, double b,
                           double abs_tol = 1e-10, std::span<const double> breakpoints = {},
                           unsigned max_panels = 4000);

/// Like integrate() but throws Degenerate when the tolerance is not reached.
double integrate_or_throw(const std::function<double(double)>& fn, double a, double b,
                          double abs_tol = 1e-10, std::span<const double> breakpoints = {});

}  // namespace mcbound
