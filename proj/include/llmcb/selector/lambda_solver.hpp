#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "llmcb/core/errors.hpp"

namespace llmcb::selector {

inline constexpr double kLambdaResidualTol = 1e-10;
inline constexpr int kLambdaMaxIterations = 640;

/// Sum_i 1 / (inv_p_i + eta * (lbar_i - lambda)). Returns +inf when any
/// denominator is non-positive (lambda at or beyond the first pole).
inline double normalization_sum(std::span<const double> inv_p, double eta, std::span<const double> lbar,
                                double lambda) {
  double s = 0.0;
  for (std::size_t i = 0; i < inv_p.size(); ++i) {
    const double denom = inv_p[i] + eta * (lbar[i] - lambda);
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    s += 1.0 / denom;
  }
  return s;
}

/// Finds lambda with Sum_i 1/(inv_p_i + eta (lbar_i - lambda)) = 1.
///
/// The sum is increasing in lambda up to the first pole
/// min_i (inv_p_i / eta + lbar_i), is <= 1 at min(lbar) and >= 1 at max(lbar)
/// whenever max(lbar) lies below the pole, so the root is bracketed by
/// [min(lbar), min(max(lbar), pole)). Bisection keeps the bracket; secant and
/// inverse-quadratic steps are taken when they land strictly inside it.
inline double solve_lambda(std::span<const double> inv_p, double eta, std::span<const double> lbar) {
  if (inv_p.size() != lbar.size() || inv_p.empty()) throw SolverError("solve_lambda: size mismatch");
  if (!(eta > 0.0)) throw SolverError("solve_lambda: eta must be > 0");

  const auto [min_it, max_it] = std::minmax_element(lbar.begin(), lbar.end());
  double lo = *min_it;
  double hi = *max_it;

  auto f = [&](double lambda) { return normalization_sum(inv_p, eta, lbar, lambda) - 1.0; };

  double f_lo = f(lo);
  if (std::abs(f_lo) <= kLambdaResidualTol) return lo;
  if (f_lo > 0.0) throw SolverError("solve_lambda: normalization sum exceeds 1 at the lower bracket end");

  double pole = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < inv_p.size(); ++i) pole = std::min(pole, inv_p[i] / eta + lbar[i]);
  if (pole <= hi) hi = pole;
  double f_hi = f(hi);
  if (std::abs(f_hi) <= kLambdaResidualTol) return hi;
  if (f_hi < 0.0) throw SolverError("solve_lambda: root not bracketed");

  double prev = std::numeric_limits<double>::quiet_NaN();
  double f_prev = std::numeric_limits<double>::quiet_NaN();
  double best = lo;
  double f_best = f_lo;
  bool bisect_next = false;

  for (int iter = 0; iter < kLambdaMaxIterations && hi > lo; ++iter) {
    const double width = hi - lo;
    double candidate = 0.5 * (lo + hi);
    if (!bisect_next && std::isfinite(f_hi)) {
      double interp = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(f_prev) && f_prev != f_lo && f_prev != f_hi) {
        interp = lo * f_hi * f_prev / ((f_lo - f_hi) * (f_lo - f_prev)) +
                 hi * f_lo * f_prev / ((f_hi - f_lo) * (f_hi - f_prev)) +
                 prev * f_lo * f_hi / ((f_prev - f_lo) * (f_prev - f_hi));
      }
      if (!(interp > lo && interp < hi)) interp = lo - f_lo * width / (f_hi - f_lo);
      if (interp > lo + 1e-6 * width && interp < hi - 1e-6 * width) candidate = interp;
    }
    const double fc = f(candidate);
    if (std::abs(fc) < std::abs(f_best)) {
      best = candidate;
      f_best = fc;
    }
    if (std::abs(fc) <= kLambdaResidualTol) return candidate;

    // The replaced endpoint becomes the third point for the next interpolation.
    if (fc < 0.0) {
      prev = lo;
      f_prev = f_lo;
      lo = candidate;
      f_lo = fc;
    } else {
      prev = hi;
      f_prev = f_hi;
      hi = candidate;
      f_hi = fc;
    }
    // An interpolation step that failed to halve the bracket is followed by bisection.
    bisect_next = !bisect_next && (hi - lo) > 0.5 * width;
  }
  if (std::abs(f_best) <= kLambdaResidualTol) return best;
  throw SolverError("solve_lambda: residual " + std::to_string(f_best) + " above tolerance after " +
                    std::to_string(kLambdaMaxIterations) + " iterations");
}

}  // namespace llmcb::selector
