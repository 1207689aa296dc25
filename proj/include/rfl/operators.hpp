#pragma once

/** @file
 * Discretized integral operators on L₂(T) and the solve Bc = Râ.
 *
 * Kernels are never tabulated in time.  Each operator is a truncated
 * frequency quadratic form
 *   K(t, u) = (1/2π) Σ_m w(λ_m) e^{iλ_m(u ∓ t)} Δλ
 * evaluated over the positive half grid, then multiplied on the right by the
 * time quadrature weights, so (Kx)(t_j) = Σ_k K(t_j, u_k) W_k x_k.
 */

#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include "rfl/problem.hpp"
#include "rfl/spectra.hpp"

namespace rfl {

/// Argument of the f/(f+g) kernel.  `mirrored` uses −(u+t) for every column;
/// `as_printed` uses −(u+t) for gap columns and (u−t) for half-line columns.
enum class RGapKernel { as_printed, mirrored };

inline const char* to_string(RGapKernel k) {
  return k == RGapKernel::mirrored ? "mirrored" : "as_printed";
}

inline RGapKernel parse_kernel(const std::string& s) {
  if (s == "mirrored") return RGapKernel::mirrored;
  if (s == "as_printed") return RGapKernel::as_printed;
  throw Error(ErrorKind::InvalidArgument, "unknown r_gap_kernel '" + s + "'");
}

/// E_{m,k} = e^{iλ_m t_k}.  Only used for inspection; assembly goes through
/// the half basis.
inline Eigen::MatrixXcd fourier_matrix(const FrequencyGrid& grid, std::span<const double> times) {
  Eigen::MatrixXcd e(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(times.size()));
  for (Eigen::Index k = 0; k < e.cols(); ++k) {
    for (Eigen::Index m = 0; m < e.rows(); ++m) {
      const double x = grid[m] * times[static_cast<std::size_t>(k)];
      e(m, k) = {std::cos(x), std::sin(x)};
    }
  }
  return e;
}

/// Rejects f+g ≤ 0 anywhere on the grid.
inline Vector density_sum(const Vector& f, const Vector& g) {
  Vector s = f + g;
  for (Eigen::Index m = 0; m < s.size(); ++m) {
    if (!(s[m] > 0.0)) {
      throw Error(ErrorKind::SingularDensitySum,
                  "f+g vanishes at grid index " + std::to_string(m));
    }
  }
  return s;
}

namespace detail {

/// 2q·(Cᵀ D C + sign·Sᵀ D S): the symmetric kernel matrix before time weights.
inline Matrix kernel_gram(const HalfBasis& basis, const FrequencyGrid& grid, const Vector& weight,
                          double sign) {
  const Vector d = 2.0 * grid.quadrature() * weight.tail(grid.half());
  const Matrix dc = d.asDiagonal() * basis.cos;
  const Matrix ds = d.asDiagonal() * basis.sin;
  Matrix out = basis.cos.transpose() * dc;
  out.noalias() += sign * (basis.sin.transpose() * ds);
  return out;
}

/// Same form applied to one vector x (already time-weighted).
inline Vector kernel_apply(const HalfBasis& basis, const FrequencyGrid& grid, const Vector& weight,
                           double sign, const Vector& weighted_x) {
  const Vector d = 2.0 * grid.quadrature() * weight.tail(grid.half());
  const Vector yc = d.cwiseProduct(basis.cos * weighted_x);
  const Vector ys = d.cwiseProduct(basis.sin * weighted_x);
  return basis.cos.transpose() * yc + sign * (basis.sin.transpose() * ys);
}

}  // namespace detail

/// B = G[1/(f+g)]·diag(W).
inline Matrix assemble_B(const FilterProblem& p, const Vector& f, const Vector& g) {
  const Vector inv = density_sum(f, g).cwiseInverse();
  return detail::kernel_gram(p.target_basis(), p.frequencies(), inv, 1.0) *
         p.target().weights.asDiagonal();
}

inline Matrix assemble_R(const FilterProblem& p, const Vector& f, const Vector& g,
                         RGapKernel kernel = RGapKernel::mirrored) {
  const Vector w = f.cwiseQuotient(density_sum(f, g));
  const Matrix mirrored = detail::kernel_gram(p.target_basis(), p.frequencies(), w, -1.0);
  Matrix out = mirrored;
  if (kernel == RGapKernel::as_printed) {
    const Matrix direct = detail::kernel_gram(p.target_basis(), p.frequencies(), w, 1.0);
    for (Eigen::Index k = 0; k < out.cols(); ++k) {
      if (!p.target().in_gap[static_cast<std::size_t>(k)]) out.col(k) = direct.col(k);
    }
  }
  return out * p.target().weights.asDiagonal();
}

inline Matrix assemble_Q(const FilterProblem& p, const Vector& f, const Vector& g) {
  const Vector w = f.cwiseProduct(g).cwiseQuotient(density_sum(f, g));
  return detail::kernel_gram(p.target_basis(), p.frequencies(), w, 1.0) *
         p.target().weights.asDiagonal();
}

/// Râ without forming R.
inline Vector apply_R(const FilterProblem& p, const Vector& f, const Vector& g, const Vector& x,
                      RGapKernel kernel = RGapKernel::mirrored) {
  const Vector w = f.cwiseQuotient(density_sum(f, g));
  const Vector wx = p.target().weights.cwiseProduct(x);
  if (kernel == RGapKernel::mirrored) {
    return detail::kernel_apply(p.target_basis(), p.frequencies(), w, -1.0, wx);
  }
  Vector gap_part = wx;
  Vector line_part = wx;
  for (Eigen::Index k = 0; k < wx.size(); ++k) {
    (p.target().in_gap[static_cast<std::size_t>(k)] ? line_part : gap_part)[k] = 0.0;
  }
  return detail::kernel_apply(p.target_basis(), p.frequencies(), w, -1.0, gap_part) +
         detail::kernel_apply(p.target_basis(), p.frequencies(), w, 1.0, line_part);
}

inline Vector apply_Q(const FilterProblem& p, const Vector& f, const Vector& g, const Vector& x) {
  const Vector w = f.cwiseProduct(g).cwiseQuotient(density_sum(f, g));
  return detail::kernel_apply(p.target_basis(), p.frequencies(), w, 1.0,
                              p.target().weights.cwiseProduct(x));
}

/// ⟨x, y⟩ in L₂(T) with the target trapezoid weights.
inline double inner(const TargetGrid& grid, const Vector& x, const Vector& y) {
  return grid.weights.cwiseProduct(x).dot(y);
}

struct SolveOptions {
  double cond_max = 1e12;
  double tol_solve = 1e-8;
  double ridge_factor = 1e-10;
};

struct SolveReport {
  Vector c;
  double condition = 0.0;
  double residual = 0.0;  ///< ‖Bc − Râ‖/‖Râ‖ over the constrained rows
  bool regularized = false;
  double ridge = 0.0;
};

/**
 * Solves Bc = Râ on the constrained rows; c is zero at the origin.
 * With y = W∘c the system is symmetric, G_KK y_K = (Râ)_K, so a Cholesky
 * factorization applies.
 */
inline SolveReport solve_c(const Matrix& B, const Vector& weights, const Vector& rhs,
                           const std::vector<Eigen::Index>& constrained, SolveOptions options = {}) {
  const Eigen::Index n = static_cast<Eigen::Index>(constrained.size());
  Matrix g(n, n);
  Vector b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = constrained[static_cast<std::size_t>(i)];
    b[i] = rhs[r];
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index c = constrained[static_cast<std::size_t>(j)];
      g(i, j) = B(r, c) / weights[c];
    }
  }
  g = 0.5 * (g + g.transpose()).eval();

  SolveReport report;
  report.c = Vector::Zero(rhs.size());
  const double scale = b.norm();
  if (scale == 0.0) return report;

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  const Vector ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  const double bottom = ev.minCoeff();
  report.condition = bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();

  Matrix system = g;
  if (report.condition > options.cond_max) {
    report.regularized = true;
    report.ridge = options.ridge_factor * g.trace() / static_cast<double>(n);
    system.diagonal().array() += report.ridge;
  }
  Vector y;
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() == Eigen::Success) {
    y = llt.solve(b);
  } else {
    y = system.ldlt().solve(b);
  }
  report.residual = (g * y - b).norm() / scale;
  if (!y.allFinite() || (report.regularized && report.residual > options.tol_solve)) {
    throw Error(ErrorKind::IllConditioned,
                "cond=" + std::to_string(report.condition) +
                    " residual=" + std::to_string(report.residual));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k = constrained[static_cast<std::size_t>(i)];
    report.c[k] = y[i] / weights[k];
  }
  return report;
}

/// Conjugate-gradient version of solve_c, used as an independent check.
inline Vector solve_c_iterative(const Matrix& B, const Vector& weights, const Vector& rhs,
                                const std::vector<Eigen::Index>& constrained, double tol = 1e-13) {
  const Eigen::Index n = static_cast<Eigen::Index>(constrained.size());
  Matrix g(n, n);
  Vector b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = constrained[static_cast<std::size_t>(i)];
    b[i] = rhs[r];
    for (Eigen::Index j = 0; j < n; ++j) {
      g(i, j) = B(r, constrained[static_cast<std::size_t>(j)]) /
                weights[constrained[static_cast<std::size_t>(j)]];
    }
  }
  g = 0.5 * (g + g.transpose()).eval();
  Eigen::ConjugateGradient<Matrix, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(20 * n);
  cg.compute(g);
  const Vector y = cg.solve(b);
  Vector c = Vector::Zero(rhs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k = constrained[static_cast<std::size_t>(i)];
    c[k] = y[i] / weights[k];
  }
  return c;
}

}  // namespace rfl
