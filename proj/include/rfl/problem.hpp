#pragma once

/** @file
 * Observation geometry: the missing intervals S on the negative half-line,
 * their mirror S⁺, the target set T = S ∪ [0, T_h], the observation set
 * [−T_obs, 0] ∖ S, and the functional weight a(t) with its transform.
 *
 * All time grids are lattice points kΔt aligned to the origin, so the target
 * and observation grids share Δt and never straddle each other.
 */

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "rfl/errors.hpp"
#include "rfl/spectra.hpp"

namespace rfl {

namespace detail {
inline double time_tol(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }
}  // namespace detail

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double t) const {
    return t >= lo - detail::time_tol(lo) && t <= hi + detail::time_tol(hi);
  }
  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// One observed span K followed by one gap of length N.
struct Segment {
  double observed = 0.0;  // K_l
  double missing = 0.0;   // N_l
};

class MissingPattern {
 public:
  MissingPattern() = default;

  /// Explicit closed gaps; sorted closest-to-origin first.
  static MissingPattern from_gaps(std::vector<Interval> gaps) {
    for (const auto& gap : gaps) {
      if (!(gap.lo < gap.hi)) {
        throw Error(ErrorKind::InvalidArgument, "gap must satisfy lo < hi");
      }
      if (!(gap.hi < 0.0)) {
        throw Error(ErrorKind::GapTouchesOrigin,
                    "gap [" + std::to_string(gap.lo) + ", " + std::to_string(gap.hi) +
                        "] must end strictly before the origin");
      }
    }
    std::sort(gaps.begin(), gaps.end(),
              [](const Interval& a, const Interval& b) { return a.hi > b.hi; });
    for (std::size_t j = 1; j < gaps.size(); ++j) {
      if (gaps[j].hi >= gaps[j - 1].lo) {
        throw Error(ErrorKind::OverlappingGaps, "gaps overlap or touch");
      }
    }
    MissingPattern p;
    p.gaps_ = std::move(gaps);
    return p;
  }

  /**
   * Gaps from the cumulative recursion M_l = Σ_{k=0}^{l} (N_k + K_k), with
   * the l-th gap [−M_l − N_l, −M_l].  The sum includes k = l.
   */
  static MissingPattern from_segments(const std::vector<Segment>& segments) {
    std::vector<Interval> gaps;
    double offset = 0.0;
    for (const auto& s : segments) {
      if (!(s.observed > 0.0) || !(s.missing > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "segments need K > 0 and N > 0");
      }
      offset += s.observed + s.missing;
      gaps.push_back({-offset - s.missing, -offset});
    }
    return from_gaps(std::move(gaps));
  }

  const std::vector<Interval>& gaps() const { return gaps_; }
  bool empty() const { return gaps_.empty(); }

  /// S⁺: exact reflections of the gaps.
  std::vector<Interval> mirror() const {
    std::vector<Interval> out;
    out.reserve(gaps_.size());
    for (const auto& g : gaps_) out.push_back({-g.hi, -g.lo});
    return out;
  }

  bool in_gap(double t) const {
    return std::any_of(gaps_.begin(), gaps_.end(), [t](const Interval& g) { return g.contains(t); });
  }
  bool in_mirror(double t) const { return in_gap(-t); }

  /// Depth of the deepest gap, 0 when there are none.
  double depth() const { return gaps_.empty() ? 0.0 : -gaps_.back().lo; }

 private:
  std::vector<Interval> gaps_;
};

// ---------------------------------------------------------------------------

/// Weight a(t) of the functional Aξ = ∫ a(t) ξ(−t) dt, supported on [0, ∞).
class WeightFunction {
 public:
  struct ExpWindow {
    double rate = 1.0;
    double t_max = 1.0;
  };
  /// Linear interpolation between nodes, zero outside them.
  struct Tabulated {
    std::vector<double> times;
    std::vector<double> values;
  };
  using Variant = std::variant<ExpWindow, Tabulated>;

  static WeightFunction exp_window(double rate, double t_max) {
    if (!(t_max >= 0.0)) throw Error(ErrorKind::InvalidArgument, "t_max must be >= 0");
    return WeightFunction(ExpWindow{rate, t_max});
  }
  static WeightFunction tabulated(std::vector<double> times, std::vector<double> values) {
    if (times.empty() || times.size() != values.size()) {
      throw Error(ErrorKind::InvalidArgument, "tabulated weight needs matching arrays");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] < 0.0 || (i > 0 && !(times[i] > times[i - 1]))) {
        throw Error(ErrorKind::InvalidArgument, "weight nodes must be nonnegative and increasing");
      }
    }
    return WeightFunction(Tabulated{std::move(times), std::move(values)});
  }
  static WeightFunction zero() { return exp_window(0.0, 1.0).truncated(0.0); }

  const Variant& variant() const { return node_; }
  /// Support is cut at this horizon (infinite unless truncated).
  double cutoff() const { return cutoff_; }
  bool is_zero() const { return cutoff_ <= 0.0; }

  double operator()(double t) const {
    if (cutoff_ <= 0.0 || t < -detail::time_tol(t) || t > cutoff_ + detail::time_tol(cutoff_)) {
      return 0.0;
    }
    return std::visit([t](const auto& node) { return eval(node, t); }, node_);
  }

  /// Closed interval outside which a vanishes; a is continuous inside it.
  Interval support() const {
    const Interval natural = std::visit(
        [](const auto& node) {
          if constexpr (std::is_same_v<std::decay_t<decltype(node)>, ExpWindow>) {
            return Interval{0.0, node.t_max};
          } else {
            return Interval{node.times.front(), node.times.back()};
          }
        },
        node_);
    return {natural.lo, std::min(natural.hi, cutoff_)};
  }

  /// a_N: equal to a on [0, N], zero beyond.  N ≤ 0 gives the zero weight.
  WeightFunction truncated(double horizon) const {
    WeightFunction out = *this;
    out.cutoff_ = horizon <= 0.0 ? 0.0 : std::min(cutoff_, horizon);
    return out;
  }

 private:
  explicit WeightFunction(Variant node) : node_(std::move(node)) {}

  static double eval(const ExpWindow& w, double t) {
    return t <= w.t_max + detail::time_tol(w.t_max) ? std::exp(-w.rate * std::max(t, 0.0)) : 0.0;
  }
  static double eval(const Tabulated& w, double t) {
    if (t < w.times.front() - detail::time_tol(t) || t > w.times.back() + detail::time_tol(t)) {
      return 0.0;
    }
    if (w.times.size() == 1) return w.values.front();
    const auto it = std::upper_bound(w.times.begin(), w.times.end(), t);
    if (it == w.times.begin()) return w.values.front();
    if (it == w.times.end()) return w.values.back();
    const std::size_t i = static_cast<std::size_t>(it - w.times.begin());
    const double u = (t - w.times[i - 1]) / (w.times[i] - w.times[i - 1]);
    return (1.0 - u) * w.values[i - 1] + u * w.values[i];
  }

  Variant node_;
  double cutoff_ = std::numeric_limits<double>::infinity();
};

inline WeightFunction truncate_weight(const WeightFunction& a, double horizon) {
  return a.truncated(horizon);
}

// ---------------------------------------------------------------------------

namespace detail {

/// Origin-aligned lattice points kΔt inside [lo, hi].
inline std::vector<double> lattice(double lo, double hi, double step) {
  const auto k0 = static_cast<long long>(std::ceil(lo / step - 1e-9));
  const auto k1 = static_cast<long long>(std::floor(hi / step + 1e-9));
  std::vector<double> out;
  for (long long k = k0; k <= k1; ++k) out.push_back(static_cast<double>(k) * step);
  return out;
}

/// Trapezoid weights for one piece of consecutive lattice points.
inline void append_trapezoid(std::vector<double>& weights, std::size_t count, double step) {
  for (std::size_t i = 0; i < count; ++i) {
    const bool end = (i == 0 || i + 1 == count);
    weights.push_back(count == 1 ? step : (end ? 0.5 * step : step));
  }
}

}  // namespace detail

/**
 * Lattice covering S ∪ [0, T_h].  `constrained` lists the points where the
 * operator equation is imposed: all of them except the origin, which is
 * also an observation point and where c vanishes.
 */
struct TargetGrid {
  double step = 0.0;
  double horizon = 0.0;
  std::vector<double> points;
  Vector weights;
  std::vector<bool> in_gap;
  std::vector<Eigen::Index> constrained;
  Eigen::Index origin = -1;

  Eigen::Index size() const { return static_cast<Eigen::Index>(points.size()); }
};

inline TargetGrid build_target_grid(const MissingPattern& pattern, double horizon, double step) {
  if (!(step > 0.0) || !(horizon > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "target grid needs dt > 0 and T_h > 0");
  }
  TargetGrid grid;
  grid.step = step;
  grid.horizon = horizon;
  std::vector<double> weights;
  // Deepest gap first so the points come out increasing.
  const auto& gaps = pattern.gaps();
  for (auto it = gaps.rbegin(); it != gaps.rend(); ++it) {
    const auto pts = detail::lattice(it->lo, it->hi, step);
    if (pts.size() < 2) {
      throw Error(ErrorKind::GapUnderResolved,
                  "gap [" + std::to_string(it->lo) + ", " + std::to_string(it->hi) + "] holds " +
                      std::to_string(pts.size()) + " grid point(s) at dt=" + std::to_string(step));
    }
    grid.points.insert(grid.points.end(), pts.begin(), pts.end());
    grid.in_gap.insert(grid.in_gap.end(), pts.size(), true);
    detail::append_trapezoid(weights, pts.size(), step);
  }
  const auto half_line = detail::lattice(0.0, horizon, step);
  if (half_line.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "horizon T_h must span at least one step");
  }
  grid.origin = static_cast<Eigen::Index>(grid.points.size());
  grid.points.insert(grid.points.end(), half_line.begin(), half_line.end());
  grid.in_gap.insert(grid.in_gap.end(), half_line.size(), false);
  detail::append_trapezoid(weights, half_line.size(), step);
  grid.weights = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (k != grid.origin) grid.constrained.push_back(k);
  }
  return grid;
}

/// Lattice on [−T_obs, 0] ∖ S with trapezoid weights per observed run.
struct ObservationGrid {
  std::vector<double> points;
  Vector weights;

  Eigen::Index size() const { return static_cast<Eigen::Index>(points.size()); }
};

inline ObservationGrid build_observation_grid(const MissingPattern& pattern, double obs_horizon,
                                              double step) {
  ObservationGrid grid;
  std::vector<double> weights;
  std::vector<double> run;
  auto flush = [&] {
    grid.points.insert(grid.points.end(), run.begin(), run.end());
    detail::append_trapezoid(weights, run.size(), step);
    run.clear();
  };
  for (double t : detail::lattice(-obs_horizon, 0.0, step)) {
    if (pattern.in_gap(t)) {
      flush();
    } else {
      run.push_back(t);
    }
  }
  flush();
  grid.weights = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return grid;
}

/// â on the target grid: a on R^s, zero on S and on S⁺.
inline Vector extend_weight(const WeightFunction& a, const MissingPattern& pattern,
                            const TargetGrid& grid) {
  Vector out = Vector::Zero(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const double t = grid.points[static_cast<std::size_t>(k)];
    if (grid.in_gap[static_cast<std::size_t>(k)] || pattern.in_mirror(t) || t < 0.0) continue;
    out[k] = a(t);
  }
  return out;
}

/**
 * â for quadrature.  Where â jumps at a lattice point (edges of S⁺, end of
 * the support of a) the value is the mean of the one-sided limits, so the
 * trapezoid rule stays second order; at the ends of [0, T_h] the limit from
 * inside is used.  Elsewhere it equals extend_weight.
 */
inline Vector extend_weight_quadrature(const WeightFunction& a, const MissingPattern& pattern,
                                       const TargetGrid& grid) {
  Vector out = Vector::Zero(grid.size());
  if (a.is_zero()) return out;
  const Interval support = a.support();
  const double delta = 1e-6 * grid.step;
  auto inside = [&](double s) {
    return s >= 0.0 && s > support.lo - 0.5 * delta && s < support.hi + 0.5 * delta &&
           !pattern.in_mirror(s);
  };
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (grid.in_gap[static_cast<std::size_t>(k)]) continue;
    const double t = grid.points[static_cast<std::size_t>(k)];
    if (t < -detail::time_tol(t)) continue;
    const bool first = k == grid.origin;
    const bool last = k + 1 == grid.size();
    const double left = first ? (inside(t + delta) ? 1.0 : 0.0) : (inside(t - delta) ? 1.0 : 0.0);
    const double right = last ? left : (inside(t + delta) ? 1.0 : 0.0);
    const double share = first ? right : 0.5 * (left + right);
    if (share == 0.0) continue;
    // a is continuous on its support, so a(t) is the limit from inside.
    double value = a(t);
    if (value == 0.0 && share > 0.0) value = a(std::clamp(t, support.lo, support.hi));
    out[k] = share * value;
  }
  return out;
}

struct WeightMoments {
  double l1 = 0.0;       ///< ∫|a|
  double t_l2 = 0.0;     ///< ∫ t|a|²
};

/// Integrability checks on the weight over the truncated horizon.
inline WeightMoments weight_moments(const Vector& extended, const TargetGrid& grid) {
  WeightMoments m;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const double t = grid.points[static_cast<std::size_t>(k)];
    m.l1 += grid.weights[k] * std::abs(extended[k]);
    m.t_l2 += grid.weights[k] * std::abs(t) * extended[k] * extended[k];
  }
  if (!std::isfinite(m.l1) || !std::isfinite(m.t_l2)) {
    throw Error(ErrorKind::InvalidArgument, "weight is not integrable on the horizon");
  }
  return m;
}

// ---------------------------------------------------------------------------

struct Discretization {
  double cutoff = 64.0;
  std::size_t n_freq = 8192;
  double dt = 0.05;
  double horizon = 8.0;
  double obs_horizon = 12.0;
};

/**
 * Immutable bundle of geometry, weight and grids.  The cosine/sine bases for
 * the target and observation grids are computed once and shared between
 * copies (e.g. the truncated-weight variant).
 */
class FilterProblem {
 public:
  FilterProblem(MissingPattern pattern, WeightFunction weight, Discretization disc)
      : pattern_(std::move(pattern)),
        weight_(std::move(weight)),
        disc_(disc),
        freq_(disc.cutoff, disc.n_freq),
        target_(build_target_grid(pattern_, disc.horizon, disc.dt)),
        observation_(build_observation_grid(pattern_, disc.obs_horizon, disc.dt)) {
    if (!(disc.obs_horizon > pattern_.depth())) {
      throw Error(ErrorKind::InvalidArgument, "observation horizon must reach past the deepest gap");
    }
    const double span_target = disc.horizon + pattern_.depth();
    require_resolvable(freq_, std::max({span_target, disc.obs_horizon, disc.horizon}));
    target_basis_ = std::make_shared<const HalfBasis>(freq_, target_.points);
    observation_basis_ = std::make_shared<const HalfBasis>(freq_, observation_.points);
    extended_ = extend_weight_quadrature(weight_, pattern_, target_);
  }

  const MissingPattern& pattern() const { return pattern_; }
  const WeightFunction& weight() const { return weight_; }
  const Discretization& discretization() const { return disc_; }
  const FrequencyGrid& frequencies() const { return freq_; }
  const TargetGrid& target() const { return target_; }
  const ObservationGrid& observation() const { return observation_; }
  const HalfBasis& target_basis() const { return *target_basis_; }
  const HalfBasis& observation_basis() const { return *observation_basis_; }
  /// â on the target grid, with jump points averaged for quadrature.
  const Vector& extended_weight() const { return extended_; }

  /// Δt·Λ/π; above 1 the time lattice is coarser than the band limit.
  double nyquist_ratio() const { return disc_.dt * disc_.cutoff / std::numbers::pi; }

  /// Same geometry and grids with another weight (shares the bases).
  FilterProblem with_weight(WeightFunction weight) const {
    FilterProblem out = *this;
    out.weight_ = std::move(weight);
    out.extended_ = extend_weight_quadrature(out.weight_, out.pattern_, out.target_);
    return out;
  }

 private:
  MissingPattern pattern_;
  WeightFunction weight_;
  Discretization disc_;
  FrequencyGrid freq_;
  TargetGrid target_;
  ObservationGrid observation_;
  std::shared_ptr<const HalfBasis> target_basis_;
  std::shared_ptr<const HalfBasis> observation_basis_;
  Vector extended_;
};

/// A(e^{iλ}) = ∫_{R^s} a(t) e^{−itλ} dt by the target-grid trapezoid rule.
inline CVector weight_transform(const Vector& extended, const TargetGrid& grid,
                                const HalfBasis& basis) {
  return forward_transform(basis, grid.weights.cwiseProduct(extended), -1);
}

inline CVector weight_transform(const FilterProblem& problem) {
  return weight_transform(problem.extended_weight(), problem.target(), problem.target_basis());
}

/// Same quadrature as weight_transform, evaluated at an arbitrary frequency.
inline std::function<std::complex<double>(double)> weight_transform_function(
    const FilterProblem& problem) {
  const TargetGrid& grid = problem.target();
  Vector weighted = grid.weights.cwiseProduct(problem.extended_weight());
  std::vector<double> times = grid.points;
  return [weighted = std::move(weighted), times = std::move(times)](double lambda) {
    std::complex<double> total{0.0, 0.0};
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double w = weighted[static_cast<Eigen::Index>(k)];
      if (w == 0.0) continue;
      const double x = -lambda * times[k];
      total += w * std::complex<double>(std::cos(x), std::sin(x));
    }
    return total;
  };
}

/**
 * Deepest gap plus five correlation lengths of f+g, the correlation length
 * being the first lag where the covariance drops below r(0)/e.
 */
inline double default_observation_horizon(const MissingPattern& pattern, const SpectralDensity& f,
                                          const SpectralDensity& g, const FrequencyGrid& grid,
                                          double step) {
  const Vector sum = eval_density(f, grid) + eval_density(g, grid);
  const double r0 = weighted_covariance(sum, grid, 0.0).real();
  double length = grid.max_lag();
  for (double lag = step; lag <= grid.max_lag(); lag += step) {
    if (weighted_covariance(sum, grid, lag).real() < r0 / std::exp(1.0)) {
      length = lag;
      break;
    }
  }
  return pattern.depth() + 5.0 * length;
}

}  // namespace rfl
