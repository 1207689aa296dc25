#pragma once

/** @file
 * Admissible density classes, sensitivity functions, least favorable
 * densities by damped best-response iteration, and saddle-point checks.
 *
 * Densities inside the solver are grid vectors; norms and powers are
 * always the grid rule (1/2π)Σ(·)Δλ.
 */

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rfl/detail/parallel.hpp"
#include "rfl/filtering.hpp"

namespace rfl {

class DensityClass {
 public:
  enum class Kind { l1_ball, l2_ball, contamination, known };

  static DensityClass l1_ball(SpectralDensity center, double eps) {
    return DensityClass(Kind::l1_ball, std::move(center), eps, 0.0);
  }
  /// Squared-norm budget: (1/2π)∫|f − center|² ≤ eps.
  static DensityClass l2_ball(SpectralDensity center, double eps) {
    return DensityClass(Kind::l2_ball, std::move(center), eps, 0.0);
  }
  /// f ≥ (1 − eps)·center with total power at most `power`.
  static DensityClass contamination(SpectralDensity center, double eps, double power) {
    if (!(eps <= 1.0)) throw Error(ErrorKind::InvalidArgument, "contamination eps must be <= 1");
    return DensityClass(Kind::contamination, std::move(center), eps, power);
  }
  static DensityClass known(SpectralDensity density) {
    return DensityClass(Kind::known, std::move(density), 0.0, 0.0);
  }

  Kind kind() const { return kind_; }
  const SpectralDensity& center() const { return center_; }
  double eps() const { return eps_; }
  double power_bound() const { return power_; }
  /// Only the center is admissible.
  bool singleton() const { return kind_ == Kind::known || eps_ == 0.0; }

 private:
  DensityClass(Kind kind, SpectralDensity center, double eps, double power)
      : kind_(kind), center_(std::move(center)), eps_(eps), power_(power) {
    if (!(eps >= 0.0)) throw Error(ErrorKind::InvalidArgument, "class radius must be >= 0");
  }

  Kind kind_;
  SpectralDensity center_;
  double eps_;
  double power_;
};

inline const char* to_string(DensityClass::Kind k) {
  switch (k) {
    case DensityClass::Kind::l1_ball: return "l1_ball";
    case DensityClass::Kind::l2_ball: return "l2_ball";
    case DensityClass::Kind::contamination: return "contamination";
    case DensityClass::Kind::known: return "known";
  }
  return "unknown";
}

/// Constraint value whose target is budget_target: the L1/L2 distance to
/// the center, or the total power for contamination.
inline double class_budget(const DensityClass& cls, const Vector& f, const Vector& center,
                           const FrequencyGrid& grid) {
  const double q = grid.quadrature();
  switch (cls.kind()) {
    case DensityClass::Kind::l2_ball: return q * (f - center).squaredNorm();
    case DensityClass::Kind::contamination: return q * f.sum();
    default: return q * (f - center).cwiseAbs().sum();
  }
}

inline double budget_target(const DensityClass& cls) {
  switch (cls.kind()) {
    case DensityClass::Kind::contamination: return cls.power_bound();
    case DensityClass::Kind::known: return 0.0;
    default: return cls.eps();
  }
}

/// |budget − target|; zero for singleton classes sitting at their center.
inline double budget_residual(const DensityClass& cls, const Vector& f, const Vector& center,
                              const FrequencyGrid& grid) {
  if (cls.singleton()) return grid.quadrature() * (f - center).cwiseAbs().sum();
  return std::abs(class_budget(cls, f, center, grid) - budget_target(cls));
}

inline void require_feasible(const DensityClass& cls, const Vector& center, const FrequencyGrid& grid) {
  if (cls.kind() == DensityClass::Kind::contamination && cls.eps() > 0.0) {
    const double floor = (1.0 - cls.eps()) * power(center, grid);
    if (cls.power_bound() < floor) {
      throw Error(ErrorKind::InfeasibleClass, "power bound " + std::to_string(cls.power_bound()) +
                                                  " is below (1-eps)*power(center)=" +
                                                  std::to_string(floor));
    }
  }
}

/// Maps a nonnegative candidate into the class.
inline Vector class_project(const Vector& candidate, const DensityClass& cls, const Vector& center,
                            const FrequencyGrid& grid) {
  if (cls.singleton()) return center;
  const double q = grid.quadrature();
  const Vector dev = candidate - center;
  switch (cls.kind()) {
    case DensityClass::Kind::l1_ball: {
      const double norm = q * dev.cwiseAbs().sum();
      return norm > cls.eps() ? Vector(center + (cls.eps() / norm) * dev) : candidate;
    }
    case DensityClass::Kind::l2_ball: {
      const double norm = q * dev.squaredNorm();
      return norm > cls.eps() ? Vector(center + std::sqrt(cls.eps() / norm) * dev) : candidate;
    }
    case DensityClass::Kind::contamination: {
      require_feasible(cls, center, grid);
      const Vector floor = (1.0 - cls.eps()) * center;
      const Vector excess = (candidate - floor).cwiseMax(0.0);
      const double room = cls.power_bound() - q * floor.sum();
      const double mass = q * excess.sum();
      const double s = mass > room ? room / mass : 1.0;
      return floor + s * excess;
    }
    case DensityClass::Kind::known: break;
  }
  return center;
}

/// h_f = |A g + C|²/(f+g)².
inline Vector sensitivity_hf(const CVector& A, const CVector& C, const Vector& f, const Vector& g) {
  const Vector s = density_sum(f, g);
  Vector out(s.size());
  for (Eigen::Index m = 0; m < s.size(); ++m) out[m] = std::norm(A[m] * g[m] + C[m]) / (s[m] * s[m]);
  return out;
}

/// h_g = |A f − C|²/(f+g)².
inline Vector sensitivity_hg(const CVector& A, const CVector& C, const Vector& f, const Vector& g) {
  const Vector s = density_sum(f, g);
  Vector out(s.size());
  for (Eigen::Index m = 0; m < s.size(); ++m) out[m] = std::norm(A[m] * f[m] - C[m]) / (s[m] * s[m]);
  return out;
}

/// Δ(h⁰; f, g) = (1/2π)∫ h_f f + (1/2π)∫ h_g g.
inline double mse_cross(const Vector& hf, const Vector& hg, const Vector& f, const Vector& g,
                        const FrequencyGrid& grid) {
  return grid.quadrature() * (hf.dot(f) + hg.dot(g));
}

// ---------------------------------------------------------------------------

struct LfdOptions {
  std::size_t max_iter = 200;
  double tol_fp = 1e-6;
  double damping = 0.5;
  double tol_budget = 1e-4;
  FilterOptions filter;
};

struct SaddlePoint {
  Vector f0;
  Vector g0;
  Vector f_center;
  Vector g_center;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  FilterSolution solution;
  std::size_t iterations = 0;
  bool converged = false;
  double fixed_point_residual = 0.0;
  double budget_residual_f = 0.0;
  double budget_residual_g = 0.0;
  double slackness_f = 0.0;
  double slackness_g = 0.0;
  double delta_nominal = 0.0;  ///< optimal MSE at the centers
  std::vector<double> history;  ///< Δ at each iterate

  double delta() const { return solution.delta; }
  SpectralDensity f0_density(const FrequencyGrid& grid) const { return SpectralDensity::tabulated(grid, f0); }
  SpectralDensity g0_density(const FrequencyGrid& grid) const { return SpectralDensity::tabulated(grid, g0); }
};

namespace detail {

struct BestResponse {
  Vector density;
  double multiplier = 0.0;
};

/// Smallest β with budget(β) ≥ target for a nondecreasing budget.
template <class Budget>
std::optional<double> bisect_level(Budget&& budget, double target) {
  if (budget(0.0) >= target) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  int grow = 0;
  while (budget(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 2000 || !std::isfinite(hi)) return std::nullopt;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (budget(mid) < target ? lo : hi) = mid;
  }
  return hi;
}

/// Best response of one density given the filter at the current pair.
/// `modulus` is |A g + C| for f or |A f − C| for g; `other` is the
/// opposite density and `sensitivity` the matching h_f or h_g.
inline BestResponse best_response(const DensityClass& cls, const Vector& center,
                                  const Vector& modulus, const Vector& other,
                                  const Vector& sensitivity, const FrequencyGrid& grid) {
  if (cls.singleton()) return {center, 0.0};
  const double q = grid.quadrature();
  switch (cls.kind()) {
    case DensityClass::Kind::l1_ball:
    case DensityClass::Kind::contamination: {
      const bool l1 = cls.kind() == DensityClass::Kind::l1_ball;
      const Vector floor = l1 ? center : Vector((1.0 - cls.eps()) * center);
      auto response = [&](double beta) { return (beta * modulus - other).cwiseMax(floor); };
      auto budget = [&](double beta) {
        return l1 ? q * (response(beta) - center).sum() : q * response(beta).sum();
      };
      const auto beta = bisect_level(budget, budget_target(cls));
      if (!beta) return {center, 0.0};
      return {response(*beta), *beta > 0.0 ? 1.0 / (*beta * *beta) : 0.0};
    }
    case DensityClass::Kind::l2_ball: {
      const double norm = q * sensitivity.squaredNorm();
      if (norm == 0.0) return {center, 0.0};
      const double gamma = std::sqrt(cls.eps() / norm);
      return {center + gamma * sensitivity, 1.0 / gamma};
    }
    case DensityClass::Kind::known: break;
  }
  return {center, 0.0};
}

/// Stationarity residual of a density against its sensitivity.
inline double slackness(const DensityClass& cls, const Vector& density, const Vector& center,
                        const Vector& sensitivity, double alpha) {
  if (cls.singleton() || alpha <= 0.0) return 0.0;
  const double top = sensitivity.maxCoeff();
  if (top <= 0.0) return 0.0;
  if (cls.kind() == DensityClass::Kind::l2_ball) {
    return (alpha * (density - center) - sensitivity).cwiseAbs().maxCoeff() / top;
  }
  const Vector floor =
      cls.kind() == DensityClass::Kind::l1_ball ? center : Vector((1.0 - cls.eps()) * center);
  double worst = 0.0;
  for (Eigen::Index m = 0; m < density.size(); ++m) {
    const bool active = density[m] > floor[m] * (1.0 + 1e-9) + 1e-14;
    const double gap = (sensitivity[m] - alpha) / alpha;
    worst = std::max(worst, active ? std::abs(gap) : std::max(gap, 0.0));
  }
  return worst;
}

}  // namespace detail

/**
 * Damped best-response iteration.  At iterate k the filter is solved at
 * (f_k, g_k); each non-fixed density is replaced by its best response to
 * the resulting sensitivity, and the pair moves a `damping` fraction of
 * the way.  Stops when the relative L1 change of the best response is
 * below tol_fp and both budgets are met; the returned pair is the last
 * iterate together with its own filter solution.
 */
inline SaddlePoint lfd_solve(const FilterProblem& problem, const DensityClass& class_f,
                             const DensityClass& class_g, const LfdOptions& options = {}) {
  const FrequencyGrid& grid = problem.frequencies();
  SaddlePoint out;
  out.f_center = eval_density(class_f.center(), grid);
  out.g_center = eval_density(class_g.center(), grid);
  require_feasible(class_f, out.f_center, grid);
  require_feasible(class_g, out.g_center, grid);

  const FilterProblem p = options.filter.horizon
      ? problem.with_weight(truncate_weight(problem.weight(), *options.filter.horizon))
      : problem;
  FilterOptions filter = options.filter;
  filter.horizon.reset();
  std::optional<MinimalityProbe> probe;
  if (filter.check_minimality) {
    probe.emplace(grid, weight_transform_function(p), filter.minimality);
    const auto r = probe->probe(class_f.center(), class_g.center());
    if (r.diverged) throw Error(ErrorKind::MinimalityViolated, "class centers fail the minimality check");
  }

  Vector f = out.f_center;
  Vector g = out.g_center;
  for (std::size_t k = 0;; ++k) {
    if (k > 0 && probe) {
      const auto r = probe->probe(SpectralDensity::tabulated(grid, f), SpectralDensity::tabulated(grid, g));
      if (r.diverged) {
        throw Error(ErrorKind::MinimalityLost, "iterate " + std::to_string(k) + " fails the minimality check");
      }
    }
    FilterSolution sol = solve_filter_values(p, f, g, filter);
    out.history.push_back(sol.delta);
    const Vector hf = sensitivity_hf(sol.A, sol.C, f, g);
    const Vector hg = sensitivity_hg(sol.A, sol.C, f, g);
    const Vector mod_f = (sol.A.cwiseProduct(g.cast<std::complex<double>>()) + sol.C).cwiseAbs();
    const Vector mod_g = (sol.A.cwiseProduct(f.cast<std::complex<double>>()) - sol.C).cwiseAbs();
    const auto next_f = detail::best_response(class_f, out.f_center, mod_f, g, hf, grid);
    const auto next_g = detail::best_response(class_g, out.g_center, mod_g, f, hg, grid);

    const double change = ((next_f.density - f).cwiseAbs().sum() + (next_g.density - g).cwiseAbs().sum()) /
                          (f.cwiseAbs().sum() + g.cwiseAbs().sum());
    out.fixed_point_residual = change;
    out.budget_residual_f = budget_residual(class_f, f, out.f_center, grid);
    out.budget_residual_g = budget_residual(class_g, g, out.g_center, grid);
    out.alpha1 = next_f.multiplier;
    out.alpha2 = next_g.multiplier;
    out.iterations = k;
    const bool done = change <= options.tol_fp && out.budget_residual_f <= options.tol_budget &&
                      out.budget_residual_g <= options.tol_budget;
    if (done || k >= options.max_iter) {
      out.converged = done;
      out.f0 = f;
      out.g0 = g;
      out.slackness_f = detail::slackness(class_f, f, out.f_center, hf, out.alpha1);
      out.slackness_g = detail::slackness(class_g, g, out.g_center, hg, out.alpha2);
      out.solution = std::move(sol);
      break;
    }
    f = (1.0 - options.damping) * f + options.damping * next_f.density;
    g = (1.0 - options.damping) * g + options.damping * next_g.density;
  }
  out.delta_nominal = out.history.front();
  return out;
}

/// Throws NoConvergence for an unconverged saddle.
inline const SaddlePoint& require_converged(const SaddlePoint& s) {
  if (!s.converged) {
    throw Error(ErrorKind::NoConvergence, "fixed point not reached after " + std::to_string(s.iterations) +
                                              " iterations (residual " +
                                              std::to_string(s.fixed_point_residual) + ")");
  }
  return s;
}

// ---------------------------------------------------------------------------

struct SaddleReport {
  std::size_t samples = 0;
  std::size_t perturbations = 0;
  double delta = 0.0;
  double left_violation = 0.0;   ///< max Δ(h⁰; f, g) − Δ(h⁰; f₀, g₀)
  double right_violation = 0.0;  ///< max Δ(h⁰; f₀, g₀) − Δ(h; f₀, g₀)
  double tolerance = 0.0;
  bool left_pass = false;
  bool right_pass = false;

  bool pass() const { return left_pass && right_pass; }
};

struct SaddleOptions {
  std::size_t samples = 100;
  std::size_t perturbations = 20;
  std::uint64_t seed = 1;
  /// Violations are accepted up to rel_tol·Δ(h⁰; f₀, g₀).
  double rel_tol = 1e-6;
  double spread = 0.5;
};

namespace detail {

inline Vector random_member(const DensityClass& cls, const Vector& base_center, const Vector& base_lfd,
                            const FrequencyGrid& grid, std::mt19937_64& rng, double spread) {
  if (cls.singleton()) return base_center;
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  const Vector& base = unit(rng) < 0.5 ? base_center : base_lfd;
  const double scale = spread * unit(rng);
  Vector candidate(base.size());
  for (Eigen::Index m = 0; m < base.size(); ++m) candidate[m] = base[m] * std::exp(scale * normal(rng));
  // Occasionally push extra mass into a random frequency band.
  if (unit(rng) < 0.5) {
    const Eigen::Index h = grid.half();
    const Eigen::Index width = 1 + static_cast<Eigen::Index>(unit(rng) * 0.05 * static_cast<double>(h));
    const Eigen::Index start = static_cast<Eigen::Index>(unit(rng) * static_cast<double>(h - width));
    const double bump = base.maxCoeff() * unit(rng);
    for (Eigen::Index m = start; m < start + width; ++m) {
      candidate[h + m] += bump;
      candidate[h - 1 - m] += bump;
    }
  }
  return class_project(candidate, cls, base_center, grid);
}

}  // namespace detail

/**
 * Left inequality: random admissible pairs evaluated with the fixed
 * sensitivities of h⁰.  Right inequality: h⁰ plus random characteristics
 * whose weights live on the observation grid, projected so that their
 * time-domain weights vanish at the constrained target points.
 */
inline SaddleReport saddle_verify(const FilterProblem& problem, const SaddlePoint& saddle,
                                  const DensityClass& class_f, const DensityClass& class_g,
                                  const SaddleOptions& options = {}) {
  const FrequencyGrid& grid = problem.frequencies();
  const FilterSolution& sol = saddle.solution;
  const Vector hf = sensitivity_hf(sol.A, sol.C, saddle.f0, saddle.g0);
  const Vector hg = sensitivity_hg(sol.A, sol.C, saddle.f0, saddle.g0);

  SaddleReport report;
  report.samples = options.samples;
  report.perturbations = options.perturbations;
  report.delta = mse_cross(hf, hg, saddle.f0, saddle.g0, grid);
  report.tolerance = options.rel_tol * std::max(report.delta, 0.0);

  std::vector<double> left(options.samples, 0.0);
  detail::parallel_for(options.samples, [&](std::size_t i) {
    auto rng = detail::make_rng(options.seed, i, 1);
    const Vector f = detail::random_member(class_f, saddle.f_center, saddle.f0, grid, rng, options.spread);
    const Vector g = detail::random_member(class_g, saddle.g_center, saddle.g0, grid, rng, options.spread);
    left[i] = mse_cross(hf, hg, f, g, grid) - report.delta;
  });

  // Constraint map from [Re h₊; Im h₊] to v at the constrained target points.
  const TargetGrid& target = problem.target();
  const HalfBasis& tb = problem.target_basis();
  const Eigen::Index h = grid.half();
  const Eigen::Index nk = static_cast<Eigen::Index>(target.constrained.size());
  Matrix M(nk, 2 * h);
  for (Eigen::Index i = 0; i < nk; ++i) {
    const Eigen::Index k = target.constrained[static_cast<std::size_t>(i)];
    M.row(i).head(h) = tb.cos.col(k).transpose();
    M.row(i).tail(h) = tb.sin.col(k).transpose();
  }
  const Eigen::LDLT<Matrix> gram((M * M.transpose()).eval());
  const double d0 = mse_direct(sol.A, sol.h, saddle.f0, saddle.g0, grid);
  const double vmax = sol.v.size() ? sol.v.cwiseAbs().maxCoeff() : 1.0;
  const ObservationGrid& obs = problem.observation();

  std::vector<double> right(options.perturbations, 0.0);
  detail::parallel_for(options.perturbations, [&](std::size_t i) {
    auto rng = detail::make_rng(options.seed, i, 2);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    const double amplitude = (vmax > 0.0 ? vmax : 1.0) * std::pow(10.0, -3.0 * unit(rng));
    Vector dv(obs.size());
    for (Eigen::Index k = 0; k < dv.size(); ++k) dv[k] = amplitude * normal(rng);
    const CVector dh_full = forward_transform(problem.observation_basis(), obs.weights.cwiseProduct(dv), +1);
    Vector x(2 * h);
    x.head(h) = dh_full.tail(h).real();
    x.tail(h) = dh_full.tail(h).imag();
    x -= M.transpose() * gram.solve(M * x);
    CVector half(h);
    for (Eigen::Index m = 0; m < h; ++m) half[m] = {x[m], x[h + m]};
    const CVector trial = sol.h + mirror_conjugate(half);
    right[i] = d0 - mse_direct(sol.A, trial, saddle.f0, saddle.g0, grid);
  });

  report.left_violation = options.samples ? *std::max_element(left.begin(), left.end()) : 0.0;
  report.right_violation =
      options.perturbations ? *std::max_element(right.begin(), right.end()) : 0.0;
  report.left_pass = report.left_violation <= report.tolerance;
  report.right_pass = report.right_violation <= report.tolerance;
  return report;
}

}  // namespace rfl
