#pragma once

/** @file
 * Gaussian stationary paths by spectral synthesis and the empirical
 * mean-square error of a linear estimator built on observation weights.
 *
 * Each positive grid frequency carries amplitude sqrt(2·d(λ)Δλ/2π), so the
 * path covariance equals the grid-rule covariance r_d(τ) exactly.
 */

#include <cmath>
#include <cstdint>
#include <random>

#include "rfl/detail/parallel.hpp"
#include "rfl/problem.hpp"
#include "rfl/spectra.hpp"

namespace rfl {

namespace detail {
inline Vector synthesis_amplitude(const Vector& density, const FrequencyGrid& grid) {
  return (2.0 * grid.quadrature() * density.tail(grid.half())).cwiseMax(0.0).cwiseSqrt();
}

inline void fill_normal(std::mt19937_64& rng, double* out, Eigen::Index n) {
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(rng);
}
}  // namespace detail

/// n paths (rows) at the given times; trial i uses its own seeded stream.
inline Matrix sample_paths(const SpectralDensity& d, const FrequencyGrid& grid,
                           std::span<const double> times, std::size_t n, std::uint64_t seed,
                           std::uint64_t stream = 0) {
  const Vector amp = detail::synthesis_amplitude(eval_density(d, grid), grid);
  const HalfBasis basis(grid, times);
  const Eigen::Index h = grid.half();
  const Eigen::Index rows = static_cast<Eigen::Index>(n);
  Matrix zc(rows, h);
  Matrix zs(rows, h);
  Vector buffer(2 * h);
  for (Eigen::Index i = 0; i < rows; ++i) {
    auto rng = detail::make_rng(seed, static_cast<std::uint64_t>(i), stream);
    detail::fill_normal(rng, buffer.data(), 2 * h);
    zc.row(i) = buffer.head(h).transpose();
    zs.row(i) = buffer.tail(h).transpose();
  }
  return zc * (amp.asDiagonal() * basis.cos) + zs * (amp.asDiagonal() * basis.sin);
}

struct SimulationReport {
  std::size_t trials = 0;
  double mse = 0.0;
  double standard_error = 0.0;
  double reference = 0.0;
  double z_score = 0.0;
  std::uint64_t seed = 0;
};

/**
 * Empirical E|Aξ − Âξ|² with Aξ = Σ_u W_u a(u) ξ(−u) and
 * Âξ = Σ_k q_k w_k (ξ+η)(t_k).  Both are linear in the synthesis
 * coefficients, so each trial reduces to dot products with precomputed
 * coefficient vectors; this is the same quadrature reassociated.
 */
inline SimulationReport empirical_mse(const Vector& weights, const FilterProblem& problem,
                                      const SpectralDensity& f, const SpectralDensity& g,
                                      std::size_t n, std::uint64_t seed, double reference) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "need at least one trial");
  const FrequencyGrid& grid = problem.frequencies();
  const ObservationGrid& obs = problem.observation();
  if (weights.size() != obs.size()) {
    throw Error(ErrorKind::InvalidArgument, "weights do not match the observation grid");
  }
  const Vector amp_f = detail::synthesis_amplitude(eval_density(f, grid), grid);
  const Vector amp_g = detail::synthesis_amplitude(eval_density(g, grid), grid);

  // Functional: ξ(−u) has basis cos(−λu) = cos λu and sin(−λu) = −sin λu.
  const TargetGrid& target = problem.target();
  const Vector a_mass = target.weights.cwiseProduct(problem.extended_weight());
  const HalfBasis& tb = problem.target_basis();
  const Vector a_cos = tb.cos * a_mass;
  const Vector a_sin = -(tb.sin * a_mass);

  const Vector beta = obs.weights.cwiseProduct(weights);
  const HalfBasis& ob = problem.observation_basis();
  const Vector b_cos = ob.cos * beta;
  const Vector b_sin = ob.sin * beta;

  const Vector xi_cos = amp_f.cwiseProduct(a_cos - b_cos);
  const Vector xi_sin = amp_f.cwiseProduct(a_sin - b_sin);
  const Vector eta_cos = -amp_g.cwiseProduct(b_cos);
  const Vector eta_sin = -amp_g.cwiseProduct(b_sin);
  const Eigen::Index h = grid.half();

  std::vector<double> squared(n, 0.0);
  detail::parallel_for(n, [&](std::size_t i) {
    Vector z(2 * h);
    auto rng_xi = detail::make_rng(seed, i, 1);
    detail::fill_normal(rng_xi, z.data(), 2 * h);
    double e = xi_cos.dot(z.head(h)) + xi_sin.dot(z.tail(h));
    auto rng_eta = detail::make_rng(seed, i, 2);
    detail::fill_normal(rng_eta, z.data(), 2 * h);
    e += eta_cos.dot(z.head(h)) + eta_sin.dot(z.tail(h));
    squared[i] = e * e;
  });

  SimulationReport r;
  r.trials = n;
  r.seed = seed;
  r.reference = reference;
  r.mse = detail::pairwise_sum(squared.data(), n) / static_cast<double>(n);
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = (squared[i] - r.mse) * (squared[i] - r.mse);
  const double var = n > 1 ? detail::pairwise_sum(centred.data(), n) / static_cast<double>(n - 1) : 0.0;
  r.standard_error = std::sqrt(var / static_cast<double>(n));
  r.z_score = r.standard_error > 0.0 ? (r.mse - reference) / r.standard_error : 0.0;
  return r;
}

}  // namespace rfl
