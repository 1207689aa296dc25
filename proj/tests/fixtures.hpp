#pragma once

#include <cmath>
#include <functional>
#include <optional>

#include "rfl/rfl.hpp"

namespace fixtures {

inline rfl::SpectralDensity f_ou() { return rfl::SpectralDensity::rational({2.0}, {1.0, 1.0}); }
inline rfl::SpectralDensity g_ou2() { return rfl::SpectralDensity::rational({1.0}, {4.0, 1.0}); }
inline rfl::WeightFunction a_exp() { return rfl::WeightFunction::exp_window(1.0, 5.0); }
inline rfl::MissingPattern gap1() { return rfl::MissingPattern::from_gaps({{-3.0, -2.0}}); }

/// Small grids for fast unit tests.
inline rfl::Discretization coarse() { return {32.0, 2048, 0.1, 8.0, 12.0}; }
inline rfl::Discretization standard() { return {}; }

inline rfl::FilterProblem p1(rfl::Discretization d = coarse()) { return {gap1(), a_exp(), d}; }

/// Composite Simpson rule on [lo, hi] with n (even) panels.
inline double simpson(const std::function<double(double)>& fn, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = fn(lo) + fn(hi);
  for (int i = 1; i < n; ++i) s += fn(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// (1/2π)∫_{−Λ}^{Λ} d(λ) cos(λτ) dλ by Simpson on the positive half.
inline double truncated_covariance(const rfl::SpectralDensity& d, double cutoff, double tau) {
  return simpson([&](double l) { return d(l) * std::cos(l * tau); }, 0.0, cutoff, 400000) / M_PI;
}

}  // namespace fixtures

namespace fixtures {

/// Runs fn and returns the ErrorKind it throws, or nullopt.
template <class Fn>
std::optional<rfl::ErrorKind> error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const rfl::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace fixtures
