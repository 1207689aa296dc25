#pragma once

/** @file
 * Spectral densities, frequency grids and the trapezoid transforms that turn
 * weighted densities into covariance kernels.
 *
 * Every density handled here is real and even in frequency, so all
 * kernels are real.  Grids are cell-centred,
 * \f$\lambda_m = -\Lambda + (m + \tfrac12)\Delta\lambda\f$, which makes
 * them exactly symmetric about zero; a transform over the full grid is
 * evaluated as twice a cosine/sine sum over the positive half.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rfl/errors.hpp"

namespace rfl {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Vector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXd;

/// Uniform cell-centred frequency grid on [-cutoff, cutoff).
class FrequencyGrid {
 public:
  FrequencyGrid(double cutoff, std::size_t count) : cutoff_(cutoff), count_(count) {
    if (!(cutoff > 0.0) || count < 2 || count % 2 != 0) {
      throw Error(ErrorKind::InvalidArgument,
                  "frequency grid needs cutoff > 0 and an even point count");
    }
    spacing_ = 2.0 * cutoff / static_cast<double>(count);
    points_.resize(static_cast<Eigen::Index>(count));
    for (std::size_t m = 0; m < count; ++m) {
      points_[static_cast<Eigen::Index>(m)] =
          -cutoff + (static_cast<double>(m) + 0.5) * spacing_;
    }
  }

  double cutoff() const { return cutoff_; }
  std::size_t size() const { return count_; }
  Eigen::Index half() const { return static_cast<Eigen::Index>(count_ / 2); }
  double spacing() const { return spacing_; }
  /// Quadrature factor Δλ/2π applied to every grid point.
  double quadrature() const { return spacing_ / kTwoPi; }
  /// Largest lag the grid resolves without wrap-around.
  double max_lag() const { return std::numbers::pi / spacing_; }

  const Vector& points() const { return points_; }
  double operator[](Eigen::Index m) const { return points_[m]; }
  /// Strictly positive points, ascending.
  auto positive() const { return points_.tail(half()); }

  /// Same spacing, twice the cutoff.
  FrequencyGrid doubled() const { return FrequencyGrid(2.0 * cutoff_, 2 * count_); }

 private:
  double cutoff_;
  std::size_t count_;
  double spacing_ = 0.0;
  Vector points_;
};

/// Cosine and sine matrices e^{iλt} = cos + i sin over the positive half grid.
struct HalfBasis {
  Matrix cos;  ///< rows: positive frequencies, cols: times
  Matrix sin;

  HalfBasis() = default;
  HalfBasis(const FrequencyGrid& grid, std::span<const double> times) {
    const Eigen::Index h = grid.half();
    const Eigen::Index n = static_cast<Eigen::Index>(times.size());
    cos.resize(h, n);
    sin.resize(h, n);
    const auto lam = grid.positive();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t = times[static_cast<std::size_t>(k)];
      for (Eigen::Index m = 0; m < h; ++m) {
        const double x = lam[m] * t;
        cos(m, k) = std::cos(x);
        sin(m, k) = std::sin(x);
      }
    }
  }

  Eigen::Index cols() const { return cos.cols(); }
};

/// Mirror a positive-half complex vector into a conjugate-symmetric full one.
inline CVector mirror_conjugate(const CVector& positive_half) {
  const Eigen::Index h = positive_half.size();
  CVector full(2 * h);
  for (Eigen::Index m = 0; m < h; ++m) {
    full[h + m] = positive_half[m];
    full[h - 1 - m] = std::conj(positive_half[m]);
  }
  return full;
}

/// Mirror positive-half real values into an even full-grid vector.
inline Vector mirror_even(const Vector& positive_half) {
  const Eigen::Index h = positive_half.size();
  Vector full(2 * h);
  for (Eigen::Index m = 0; m < h; ++m) {
    full[h + m] = positive_half[m];
    full[h - 1 - m] = positive_half[m];
  }
  return full;
}

/**
 * Σ_k weights_k x_k e^{sign·iλt_k} on the positive half grid, mirrored to the
 * full grid.  Real inputs give conjugate-symmetric output.
 */
inline CVector forward_transform(const HalfBasis& basis, const Vector& weighted, int sign) {
  const Vector re = basis.cos * weighted;
  const Vector im = static_cast<double>(sign) * (basis.sin * weighted);
  CVector half(re.size());
  for (Eigen::Index m = 0; m < re.size(); ++m) half[m] = {re[m], im[m]};
  return mirror_conjugate(half);
}

/**
 * (Δλ/2π) Σ_m X(λ_m) e^{-iλ_m t} at the basis times, for conjugate-symmetric X.
 * The result is real.
 */
inline Vector inverse_transform(const HalfBasis& basis, const FrequencyGrid& grid,
                                const CVector& full) {
  const Eigen::Index h = grid.half();
  const CVector pos = full.tail(h);
  const double q = 2.0 * grid.quadrature();
  return q * (basis.cos.transpose() * pos.real() + basis.sin.transpose() * pos.imag());
}

// ---------------------------------------------------------------------------
// Spectral densities

class SpectralDensity {
 public:
  /// Ratio of even polynomials; coefficient k multiplies λ^{2k}.
  struct Rational {
    std::vector<double> num;
    std::vector<double> den;
  };
  /// Table on λ ≥ 0, mirrored to negative frequencies.  Linear
  /// interpolation inside, flat extension outside the table.
  struct Tabulated {
    std::vector<double> lambda;
    std::vector<double> values;
  };
  struct Scaled {
    std::shared_ptr<const SpectralDensity> base;
    double factor;
  };
  struct Sum {
    std::vector<SpectralDensity> terms;
  };
  using Variant = std::variant<Rational, Tabulated, Scaled, Sum>;

  static SpectralDensity rational(std::vector<double> num, std::vector<double> den) {
    if (num.empty() || den.empty()) {
      throw Error(ErrorKind::InvalidArgument, "rational density needs coefficients");
    }
    return SpectralDensity(Rational{std::move(num), std::move(den)});
  }

  static SpectralDensity tabulated(std::vector<double> lambda, std::vector<double> values) {
    if (lambda.empty() || lambda.size() != values.size()) {
      throw Error(ErrorKind::InvalidArgument, "tabulated density needs matching arrays");
    }
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      if (lambda[i] < 0.0 || (i > 0 && !(lambda[i] > lambda[i - 1]))) {
        throw Error(ErrorKind::InvalidArgument,
                    "tabulated frequencies must be nonnegative and increasing");
      }
    }
    return SpectralDensity(Tabulated{std::move(lambda), std::move(values)});
  }

  /// Table from full-grid values; only the positive half is stored.
  static SpectralDensity tabulated(const FrequencyGrid& grid, const Vector& values) {
    const Eigen::Index h = grid.half();
    std::vector<double> lam(static_cast<std::size_t>(h));
    std::vector<double> val(static_cast<std::size_t>(h));
    for (Eigen::Index m = 0; m < h; ++m) {
      lam[static_cast<std::size_t>(m)] = grid[h + m];
      val[static_cast<std::size_t>(m)] = values[h + m];
    }
    return tabulated(std::move(lam), std::move(val));
  }

  static SpectralDensity scaled(SpectralDensity base, double factor) {
    if (!(factor >= 0.0)) throw Error(ErrorKind::InvalidArgument, "scale factor must be >= 0");
    return SpectralDensity(
        Scaled{std::make_shared<const SpectralDensity>(std::move(base)), factor});
  }

  static SpectralDensity sum(std::vector<SpectralDensity> terms) {
    return SpectralDensity(Sum{std::move(terms)});
  }

  static SpectralDensity zero() { return rational({0.0}, {1.0}); }

  const Variant& variant() const { return node_; }

  /// Value at one frequency.  Throws PoleOnGrid for a vanishing denominator.
  double operator()(double lambda) const {
    return std::visit([lambda](const auto& node) { return eval(node, lambda); }, node_);
  }

 private:
  explicit SpectralDensity(Variant node) : node_(std::move(node)) {}

  static double eval(const Rational& r, double lambda) {
    const double x = lambda * lambda;
    auto poly = [x](const std::vector<double>& c, double& magnitude) {
      double value = 0.0;
      double power = 1.0;
      magnitude = 0.0;
      for (double ck : c) {
        value += ck * power;
        magnitude += std::abs(ck * power);
        power *= x;
      }
      return value;
    };
    double num_mag = 0.0;
    double den_mag = 0.0;
    const double num = poly(r.num, num_mag);
    const double den = poly(r.den, den_mag);
    if (std::abs(den) <= std::numeric_limits<double>::epsilon() * den_mag || den_mag == 0.0) {
      throw Error(ErrorKind::PoleOnGrid, "denominator vanishes at lambda=" + std::to_string(lambda));
    }
    return num / den;
  }

  static double eval(const Tabulated& t, double lambda) {
    const double x = std::abs(lambda);
    if (x <= t.lambda.front()) return t.values.front();
    if (x >= t.lambda.back()) return t.values.back();
    const auto it = std::upper_bound(t.lambda.begin(), t.lambda.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - t.lambda.begin());
    const double x0 = t.lambda[i - 1];
    const double x1 = t.lambda[i];
    if (x == x0) return t.values[i - 1];
    const double w = (x - x0) / (x1 - x0);
    return (1.0 - w) * t.values[i - 1] + w * t.values[i];
  }

  static double eval(const Scaled& s, double lambda) { return s.factor * (*s.base)(lambda); }

  static double eval(const Sum& s, double lambda) {
    double total = 0.0;
    for (const auto& term : s.terms) total += term(lambda);
    return total;
  }

  Variant node_;
};

/// Values below -tol_neg·max|d| are rejected.
inline constexpr double kTolNegative = 1e-12;

inline Vector eval_density(const SpectralDensity& d, const FrequencyGrid& grid) {
  Vector values(static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index m = 0; m < values.size(); ++m) values[m] = d(grid[m]);
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  for (Eigen::Index m = 0; m < values.size(); ++m) {
    if (!std::isfinite(values[m])) {
      throw Error(ErrorKind::PoleOnGrid, "non-finite density value on grid");
    }
    if (values[m] < -kTolNegative * scale) {
      throw Error(ErrorKind::NegativeDensity,
                  "density is negative at lambda=" + std::to_string(grid[m]));
    }
  }
  return values;
}

/// Total power (1/2π)∫d dλ on the grid.
inline double power(const Vector& values, const FrequencyGrid& grid) {
  return grid.quadrature() * values.sum();
}

/// Ratio of the power on the doubled grid to the power on the grid; values
/// near 1 mean the tail is negligible.
inline double tail_growth(const SpectralDensity& d, const FrequencyGrid& grid) {
  const double base = power(eval_density(d, grid), grid);
  const FrequencyGrid wide = grid.doubled();
  const double extended = power(eval_density(d, wide), wide);
  return base > 0.0 ? extended / base : (extended > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
}

inline void require_resolvable(const FrequencyGrid& grid, double lag) {
  if (std::abs(lag) > grid.max_lag()) {
    throw Error(ErrorKind::UnresolvableLag,
                "lag " + std::to_string(lag) + " exceeds pi/dlambda=" + std::to_string(grid.max_lag()));
  }
}

/// κ_w(τ) = (1/2π)∫ w(λ) e^{iλτ} dλ by the grid rule.
inline std::complex<double> weighted_covariance(const Vector& weights, const FrequencyGrid& grid,
                                                double lag) {
  require_resolvable(grid, lag);
  std::complex<double> total{0.0, 0.0};
  for (Eigen::Index m = 0; m < weights.size(); ++m) {
    const double x = grid[m] * lag;
    total += weights[m] * std::complex<double>(std::cos(x), std::sin(x));
  }
  return grid.quadrature() * total;
}

/**
 * Matrix [κ_w(s_i − t_j)] for an even weight, built as a cosine/sine
 * quadratic form over the positive half grid.
 */
inline Matrix covariance_block(const Vector& weights, const FrequencyGrid& grid,
                               std::span<const double> rows, std::span<const double> cols) {
  if (!rows.empty() && !cols.empty()) {
    const auto [rmin, rmax] = std::minmax_element(rows.begin(), rows.end());
    const auto [cmin, cmax] = std::minmax_element(cols.begin(), cols.end());
    require_resolvable(grid, std::max(*rmax - *cmin, *cmax - *rmin));
  }
  const HalfBasis rb(grid, rows);
  const HalfBasis cb(grid, cols);
  const Vector d = 2.0 * grid.quadrature() * weights.tail(grid.half());
  return rb.cos.transpose() * (d.asDiagonal() * cb.cos) +
         rb.sin.transpose() * (d.asDiagonal() * cb.sin);
}

// ---------------------------------------------------------------------------
// Minimality condition

struct MinimalityOptions {
  double div_factor = 1.5;
  /// Grid points where f+g may vanish before ZeroDenominator is raised.
  std::size_t iso_max = 2;
};

struct MinimalityReport {
  double value = 0.0;
  double doubled_value = 0.0;
  bool diverged = false;
};

/// Cubic B-spline taper applied to the weight transform, |sinc(λ/2)|^8 in
/// squared modulus.
inline double minimality_taper(double lambda) {
  const double x = 0.5 * lambda;
  const double s = std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
  const double s2 = s * s;
  return s2 * s2 * s2 * s2;
}

namespace detail {
inline double minimality_sum(const Vector& fg, const Vector& gamma_sq, const FrequencyGrid& grid,
                             const MinimalityOptions& options) {
  std::size_t zeros = 0;
  double total = 0.0;
  for (Eigen::Index m = 0; m < fg.size(); ++m) {
    if (!(fg[m] > 0.0)) {
      ++zeros;
      continue;
    }
    total += gamma_sq[m] / fg[m];
  }
  if (zeros > options.iso_max) {
    throw Error(ErrorKind::ZeroDenominator,
                std::to_string(zeros) + " grid points with f+g = 0");
  }
  return grid.quadrature() * total;
}
}  // namespace detail

/**
 * Evaluates (1/2π)∫|γ|²/(f+g) on a grid and on its doubling.  γ is the
 * tapered weight transform, precomputed once so that repeated checks (one
 * per fixed-point iterate) are cheap.
 */
class MinimalityProbe {
 public:
  MinimalityProbe(const FrequencyGrid& grid, const std::function<std::complex<double>(double)>& transform,
                  MinimalityOptions options = {})
      : grid_(grid), wide_(grid.doubled()), options_(options) {
    auto fill = [&](const FrequencyGrid& g) {
      Vector out(static_cast<Eigen::Index>(g.size()));
      for (Eigen::Index m = 0; m < out.size(); ++m) {
        out[m] = std::norm(transform(g[m])) * minimality_taper(g[m]);
      }
      return out;
    };
    gamma_sq_ = fill(grid_);
    gamma_sq_wide_ = fill(wide_);
  }

  const FrequencyGrid& grid() const { return grid_; }
  const FrequencyGrid& wide_grid() const { return wide_; }

  /// Report only; never throws MinimalityViolated.
  MinimalityReport probe(const Vector& fg, const Vector& fg_wide) const {
    MinimalityReport r;
    r.value = detail::minimality_sum(fg, gamma_sq_, grid_, options_);
    r.doubled_value = detail::minimality_sum(fg_wide, gamma_sq_wide_, wide_, options_);
    r.diverged = r.value > 0.0 ? r.doubled_value > options_.div_factor * r.value
                               : r.doubled_value > 0.0;
    return r;
  }

  MinimalityReport probe(const SpectralDensity& f, const SpectralDensity& g) const {
    return probe(eval_density(f, grid_) + eval_density(g, grid_),
                 eval_density(f, wide_) + eval_density(g, wide_));
  }

 private:
  FrequencyGrid grid_;
  FrequencyGrid wide_;
  MinimalityOptions options_;
  Vector gamma_sq_;
  Vector gamma_sq_wide_;
};

/// Throws MinimalityViolated when the truncated integral keeps growing under
/// cutoff doubling.
inline MinimalityReport minimality_integral(const SpectralDensity& f, const SpectralDensity& g,
                                            const std::function<std::complex<double>(double)>& transform,
                                            const FrequencyGrid& grid, MinimalityOptions options = {}) {
  const MinimalityProbe probe(grid, transform, options);
  const MinimalityReport r = probe.probe(f, g);
  if (r.diverged) {
    throw Error(ErrorKind::MinimalityViolated,
                "integral grows from " + std::to_string(r.value) + " to " +
                    std::to_string(r.doubled_value) + " under cutoff doubling");
  }
  return r;
}

}  // namespace rfl
