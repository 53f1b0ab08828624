#pragma once

#include <cmath>
#include <string>

#include "hbre/errors.hpp"

namespace hbre::detail {

struct RootResult {
  double x;
  int iterations;
};

/// Root of an increasing function g on [lo, hi] with g(lo) <= 0 <= g(hi).
///
/// The first probe is the secant point of the bracket, every later probe is
/// the midpoint. Terminates when the bracket is below rel_tol relative to the
/// larger endpoint magnitude, or when the midpoint is no longer representable
/// strictly inside the bracket.
template <class F>
RootResult solve_increasing(F&& g, double lo, double hi, double rel_tol, int max_iter,
                            const char* what) {
  double g_lo = g(lo);
  double g_hi = g(hi);
  if (g_lo == 0.0) return {lo, 0};
  if (g_hi == 0.0) return {hi, 0};
  // endpoints that miss by rounding only: the root sits on the bound
  const double slack = 1e-12 * std::fmax(1.0, std::fmax(std::fabs(lo), std::fabs(hi)));
  if (g_lo > 0.0 && g_lo <= slack) return {lo, 0};
  if (g_hi < 0.0 && g_hi >= -slack) return {hi, 0};
  if (!(g_lo < 0.0 && g_hi > 0.0)) {
    throw DomainError(std::string(what) + ": target not bracketed");
  }
  for (int it = 1; it <= max_iter; ++it) {
    double probe;
    if (it == 1 && std::isfinite(g_lo) && std::isfinite(g_hi)) {
      probe = lo - g_lo * (hi - lo) / (g_hi - g_lo);
      if (!(probe > lo && probe < hi)) probe = lo + 0.5 * (hi - lo);
    } else {
      probe = lo + 0.5 * (hi - lo);
    }
    if (probe <= lo || probe >= hi) return {lo + 0.5 * (hi - lo), it};
    const double gp = g(probe);
    if (gp == 0.0) return {probe, it};
    if (gp < 0.0) {
      lo = probe;
      g_lo = gp;
    } else {
      hi = probe;
      g_hi = gp;
    }
    const double scale = std::fmax(std::fabs(lo), std::fabs(hi));
    if (hi - lo <= rel_tol * scale) return {lo + 0.5 * (hi - lo), it};
  }
  throw NonConvergence(std::string(what) + ": iteration cap reached", hi - lo);
}

}  // namespace hbre::detail
