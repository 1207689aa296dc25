#pragma once

/** @file
 * Spectral characteristic h, the transform C of the solution c, the two
 * forms of the mean-square error, and the time-domain weights v(t).
 */

#include <cmath>
#include <optional>

#include "rfl/operators.hpp"
#include "rfl/problem.hpp"
#include "rfl/spectra.hpp"

namespace rfl {

struct Tolerances {
  double orth = 1e-4;
  double leak = 1e-3;
  double mse = 1e-10;
  double dual = 1e-6;
  double oracle = 0.02;
  double refine = 0.01;
};

/// C(e^{iλ}) = Σ_k W_k c_k e^{iλt_k}.
inline CVector transform_C(const Vector& c, const TargetGrid& grid, const HalfBasis& basis) {
  return forward_transform(basis, grid.weights.cwiseProduct(c), +1);
}

/// h = (A f − C)/(f+g).
inline CVector spectral_characteristic(const CVector& A, const CVector& C, const Vector& f,
                                       const Vector& g) {
  const Vector s = density_sum(f, g);
  return (A.cwiseProduct(f.cast<std::complex<double>>()) - C).cwiseQuotient(s.cast<std::complex<double>>());
}

/// (1/2π)∫ [|Ag + C|² f + |Af − C|² g]/(f+g)² dλ.
inline double mse_spectral(const CVector& A, const CVector& C, const Vector& f, const Vector& g,
                           const FrequencyGrid& grid) {
  const Vector s = density_sum(f, g);
  double total = 0.0;
  for (Eigen::Index m = 0; m < s.size(); ++m) {
    const double up = std::norm(A[m] * g[m] + C[m]);
    const double down = std::norm(A[m] * f[m] - C[m]);
    total += (up * f[m] + down * g[m]) / (s[m] * s[m]);
  }
  return grid.quadrature() * total;
}

/// (1/2π)∫ [|A − h|² f + |h|² g] dλ for an arbitrary characteristic h.
inline double mse_direct(const CVector& A, const CVector& h, const Vector& f, const Vector& g,
                         const FrequencyGrid& grid) {
  double total = 0.0;
  for (Eigen::Index m = 0; m < h.size(); ++m) {
    total += std::norm(A[m] - h[m]) * f[m] + std::norm(h[m]) * g[m];
  }
  return grid.quadrature() * total;
}

/// ⟨Râ, c⟩ + ⟨Qâ, â⟩.
inline double mse_quadratic(const TargetGrid& grid, const Vector& a_hat, const Vector& Ra,
                            const Vector& c, const Vector& Qa) {
  return inner(grid, Ra, c) + inner(grid, Qa, a_hat);
}

/// Var(Aξ) = (1/2π)∫|A|² f dλ.
inline double functional_variance(const CVector& A, const Vector& f, const FrequencyGrid& grid) {
  return grid.quadrature() * A.cwiseAbs2().dot(f);
}

/// v(t) = (1/2π)∫ h e^{−itλ} dλ at the basis times.
inline Vector filter_weights(const CVector& h, const HalfBasis& basis, const FrequencyGrid& grid) {
  return inverse_transform(basis, grid, h);
}

struct FilterDiagnostics {
  double orthogonality = 0.0;        ///< max probe residual / max(|A|(f+g))
  double orthogonality_scale = 0.0;
  double leakage = 0.0;              ///< max|v| on S ∪ (0,T_h] / max|v| observed
  double dual_gap = 0.0;             ///< |Δ_quadratic − Δ_spectral|
  double energy_ratio = 0.0;         ///< Δt-energy of v on the observation grid over (1/2π)-energy of h
  double solve_residual = 0.0;
  double condition = 0.0;
  bool regularized = false;
  double ridge = 0.0;
  double nyquist_ratio = 0.0;
  std::optional<MinimalityReport> minimality;
};

struct FilterSolution {
  Vector a_hat;   ///< extended weight on the target grid
  Vector c;       ///< on the target grid
  CVector A;
  CVector C;
  CVector h;
  Vector v;       ///< on the observation grid
  double delta = 0.0;           ///< quadratic form
  double delta_spectral = 0.0;
  double var_a_xi = 0.0;
  RGapKernel kernel = RGapKernel::mirrored;
  FilterDiagnostics diagnostics;
};

struct FilterOptions {
  /// Use a_N in place of a when set.
  std::optional<double> horizon;
  RGapKernel kernel = RGapKernel::mirrored;
  SolveOptions solve;
  std::size_t orthogonality_probes = 50;
  bool check_minimality = true;
  MinimalityOptions minimality;
};

/// Residual of the orthogonality relation at `probes` evenly spaced
/// observation points, relative to max(|A|(f+g)).
inline double orthogonality_residual(const FilterProblem& p, const CVector& A, const CVector& h,
                                     const Vector& f, const Vector& g, std::size_t probes,
                                     double* scale_out = nullptr) {
  const Vector s = f + g;
  const CVector r = A.cwiseProduct(f.cast<std::complex<double>>()) -
                    h.cwiseProduct(s.cast<std::complex<double>>());
  const Vector residual = inverse_transform(p.observation_basis(), p.frequencies(), r);
  const double scale = A.cwiseAbs().cwiseProduct(s).maxCoeff();
  if (scale_out) *scale_out = scale;
  const Eigen::Index n = residual.size();
  if (n == 0 || scale == 0.0) return 0.0;
  const Eigen::Index count = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(probes));
  double worst = 0.0;
  for (Eigen::Index j = 0; j < count; ++j) {
    const Eigen::Index k = count == 1 ? 0 : (j * (n - 1)) / (count - 1);
    worst = std::max(worst, std::abs(residual[k]));
  }
  return worst / scale;
}

/// max|v| at target points in S ∪ (0, T_h] relative to max|v| observed.
inline double subspace_leakage(const FilterProblem& p, const CVector& h, const Vector& v_obs) {
  const Vector v_target = inverse_transform(p.target_basis(), p.frequencies(), h);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < v_target.size(); ++k) {
    if (k == p.target().origin) continue;
    worst = std::max(worst, std::abs(v_target[k]));
  }
  const double top = v_obs.size() ? v_obs.cwiseAbs().maxCoeff() : 0.0;
  return top > 0.0 ? worst / top : (worst > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
}

/// Pipeline on grid values; the minimality check is left to the caller.
inline FilterSolution solve_filter_values(const FilterProblem& problem, const Vector& f,
                                          const Vector& g, const FilterOptions& options = {}) {
  const FilterProblem truncated =
      options.horizon ? problem.with_weight(truncate_weight(problem.weight(), *options.horizon))
                      : problem;
  const FilterProblem& p = truncated;
  const FrequencyGrid& grid = p.frequencies();
  const TargetGrid& target = p.target();

  FilterSolution sol;
  sol.kernel = options.kernel;
  sol.a_hat = p.extended_weight();
  sol.A = weight_transform(p);

  const Matrix B = assemble_B(p, f, g);
  const Vector Ra = apply_R(p, f, g, sol.a_hat, options.kernel);
  const Vector Qa = apply_Q(p, f, g, sol.a_hat);
  const SolveReport solved = solve_c(B, target.weights, Ra, target.constrained, options.solve);
  sol.c = solved.c;
  sol.C = transform_C(sol.c, target, p.target_basis());
  sol.h = spectral_characteristic(sol.A, sol.C, f, g);
  sol.v = filter_weights(sol.h, p.observation_basis(), grid);
  sol.delta = mse_quadratic(target, sol.a_hat, Ra, sol.c, Qa);
  sol.delta_spectral = mse_spectral(sol.A, sol.C, f, g, grid);
  sol.var_a_xi = functional_variance(sol.A, f, grid);

  auto& d = sol.diagnostics;
  d.solve_residual = solved.residual;
  d.condition = solved.condition;
  d.regularized = solved.regularized;
  d.ridge = solved.ridge;
  d.dual_gap = std::abs(sol.delta - sol.delta_spectral);
  d.orthogonality = orthogonality_residual(p, sol.A, sol.h, f, g, options.orthogonality_probes,
                                           &d.orthogonality_scale);
  d.leakage = subspace_leakage(p, sol.h, sol.v);
  const double h_energy = grid.quadrature() * sol.h.cwiseAbs2().sum();
  const double v_energy = p.observation().weights.dot(sol.v.cwiseAbs2());
  d.energy_ratio = h_energy > 0.0 ? v_energy / h_energy : 1.0;
  d.nyquist_ratio = p.nyquist_ratio();
  return sol;
}

/// Full solve: evaluates f, g on the frequency grid, checks minimality and
/// runs the pipeline.
inline FilterSolution solve_filter(const FilterProblem& problem, const SpectralDensity& f,
                                   const SpectralDensity& g, const FilterOptions& options = {}) {
  const Vector fv = eval_density(f, problem.frequencies());
  const Vector gv = eval_density(g, problem.frequencies());
  std::optional<MinimalityReport> report;
  if (options.check_minimality) {
    const FilterProblem p = options.horizon
        ? problem.with_weight(truncate_weight(problem.weight(), *options.horizon))
        : problem;
    report = minimality_integral(f, g, weight_transform_function(p), problem.frequencies(),
                                 options.minimality);
  }
  FilterSolution sol = solve_filter_values(problem, fv, gv, options);
  sol.diagnostics.minimality = report;
  return sol;
}

}  // namespace rfl
