#pragma once

/** @file
 * Best linear estimate of Aξ from point observations of ξ+η by direct
 * covariance projection.  Shares only the covariance quadrature with the
 * spectral pipeline.
 */

#include <cmath>
#include <limits>

#include "rfl/problem.hpp"
#include "rfl/spectra.hpp"

namespace rfl {

/// [r_d(s_i − s_j)] at the given times.
inline Matrix covariance_from_density(const SpectralDensity& d, const FrequencyGrid& grid,
                                      std::span<const double> times) {
  return covariance_block(eval_density(d, grid), grid, times, times);
}

struct OracleSolution {
  std::vector<double> points;
  Vector coefficients;  ///< β: estimate is Σ β_k (ξ+η)(t_k)
  Vector weights;       ///< β_k / q_k, comparable with v(t)
  double mse = 0.0;
  double var_a_xi = 0.0;
  double condition = 0.0;
  bool regularized = false;
};

struct OracleOptions {
  double cond_max = 1e12;
  double ridge_factor = 1e-10;
};

inline OracleSolution oracle_solve(const FilterProblem& problem, const SpectralDensity& f,
                                   const SpectralDensity& g, OracleOptions options = {}) {
  const ObservationGrid& obs = problem.observation();
  if (obs.size() == 0) throw Error(ErrorKind::EmptyObservationGrid, "no observation points");
  const FrequencyGrid& grid = problem.frequencies();
  const Vector fv = eval_density(f, grid);
  const Vector gv = eval_density(g, grid);

  // Time quadrature of the functional: Aξ ≈ Σ_u W_u a(u) ξ(−u) over u ≥ 0.
  const TargetGrid& target = problem.target();
  std::vector<double> nodes;
  std::vector<double> mass;
  for (Eigen::Index k = 0; k < target.size(); ++k) {
    const double m = target.weights[k] * problem.extended_weight()[k];
    if (m == 0.0) continue;
    nodes.push_back(-target.points[static_cast<std::size_t>(k)]);
    mass.push_back(m);
  }
  const Vector a_mass = Eigen::Map<const Vector>(mass.data(), static_cast<Eigen::Index>(mass.size()));

  OracleSolution out;
  out.points = obs.points;
  const Eigen::Index n = obs.size();
  out.coefficients = Vector::Zero(n);
  out.weights = Vector::Zero(n);

  Matrix sigma = covariance_block(fv + gv, grid, obs.points, obs.points);
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  out.condition = bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();
  if (nodes.empty()) return out;

  const Matrix cross = covariance_block(fv, grid, nodes, obs.points);  // r_f(−u − t)
  const Vector b = cross.transpose() * a_mass;
  const Matrix auto_cov = covariance_block(fv, grid, nodes, nodes);
  out.var_a_xi = a_mass.dot(auto_cov * a_mass);

  if (out.condition > options.cond_max) {
    out.regularized = true;
    sigma.diagonal().array() += options.ridge_factor * sigma.trace() / static_cast<double>(n);
  }
  const Eigen::LDLT<Matrix> ldlt(sigma);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::IllConditioned, "covariance factorization failed");
  out.coefficients = ldlt.solve(b);
  if (!out.coefficients.allFinite()) throw Error(ErrorKind::IllConditioned, "non-finite oracle weights");
  out.mse = out.var_a_xi - b.dot(out.coefficients);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.weights[k] = obs.weights[k] > 0.0 ? out.coefficients[k] / obs.weights[k] : 0.0;
  }
  return out;
}

}  // namespace rfl
