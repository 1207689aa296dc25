#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace rfl;

namespace {
struct P1Setup {
  FilterProblem p = fixtures::p1();
  Vector f = eval_density(fixtures::f_ou(), p.frequencies());
  Vector g = eval_density(fixtures::g_ou2(), p.frequencies());
};
}  // namespace

TEST(TransformC, ZeroAndSinglePoint) {
  P1Setup s;
  const auto& T = s.p.target();
  EXPECT_EQ(transform_C(Vector::Zero(T.size()), T, s.p.target_basis()).cwiseAbs().maxCoeff(), 0.0);
  const Eigen::Index k = T.origin + 7;
  Vector c = Vector::Zero(T.size());
  c[k] = 1.0 / T.weights[k];
  const CVector C = transform_C(c, T, s.p.target_basis());
  const double t0 = T.points[static_cast<std::size_t>(k)];
  for (Eigen::Index m = 0; m < C.size(); m += 97) {
    const double x = s.p.frequencies()[m] * t0;
    EXPECT_NEAR(std::abs(C[m] - std::complex<double>(std::cos(x), std::sin(x))), 0.0, 1e-12);
  }
}

TEST(TransformC, Linear) {
  P1Setup s;
  const auto& T = s.p.target();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Vector c1(T.size()), c2(T.size());
  for (Eigen::Index k = 0; k < T.size(); ++k) {
    c1[k] = n(rng);
    c2[k] = n(rng);
  }
  const CVector lhs = transform_C(2.0 * c1 - 0.5 * c2, T, s.p.target_basis());
  const CVector rhs = 2.0 * transform_C(c1, T, s.p.target_basis()) - 0.5 * transform_C(c2, T, s.p.target_basis());
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * rhs.cwiseAbs().maxCoeff());
}

TEST(SpectralCharacteristic, Examples) {
  P1Setup s;
  const CVector A = weight_transform(s.p);
  const CVector zero = CVector::Zero(A.size());
  const CVector h = spectral_characteristic(A, zero, s.f, s.f);
  EXPECT_LE((h - 0.5 * A).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(spectral_characteristic(zero, zero, s.f, s.g).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(spectral_characteristic(A, zero, Vector::Zero(A.size()), Vector::Zero(A.size())), Error);
}

TEST(MseSpectral, ZeroCases) {
  P1Setup s;
  const CVector A = weight_transform(s.p);
  const CVector zero = CVector::Zero(A.size());
  EXPECT_EQ(mse_spectral(zero, zero, s.f, s.g, s.p.frequencies()), 0.0);
  EXPECT_EQ(mse_spectral(A, zero, s.f, Vector::Zero(A.size()), s.p.frequencies()), 0.0);
}

TEST(MseQuadratic, ZeroWeight) {
  const FilterProblem p(fixtures::gap1(), WeightFunction::zero(), fixtures::coarse());
  const auto sol = solve_filter(p, fixtures::f_ou(), fixtures::g_ou2());
  EXPECT_EQ(sol.delta, 0.0);
  EXPECT_EQ(sol.delta_spectral, 0.0);
  EXPECT_EQ(sol.h.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SolveFilter, P1DualFormsAgree) {
  const auto sol = solve_filter(fixtures::p1(), fixtures::f_ou(), fixtures::g_ou2());
  EXPECT_GT(sol.delta, 0.0);
  EXPECT_LE(std::abs(sol.delta - sol.delta_spectral), 1e-6 * (1.0 + sol.delta));
  EXPECT_LT(sol.delta, sol.var_a_xi);
  // Direct form with the solved h equals both.
  const P1Setup s;
  EXPECT_NEAR(mse_direct(sol.A, sol.h, s.f, s.g, s.p.frequencies()), sol.delta_spectral, 1e-12);
}

TEST(SolveFilter, P1OrthogonalityAndLeakage) {
  const auto sol = solve_filter(fixtures::p1(), fixtures::f_ou(), fixtures::g_ou2());
  EXPECT_LE(sol.diagnostics.orthogonality, 1e-4);
  EXPECT_LE(sol.diagnostics.leakage, 1e-3);
  EXPECT_LE(sol.diagnostics.solve_residual, 1e-8);
  ASSERT_TRUE(sol.diagnostics.minimality.has_value());
  EXPECT_FALSE(sol.diagnostics.minimality->diverged);
}

TEST(SolveFilter, HConjugateSymmetric) {
  const auto sol = solve_filter(fixtures::p1(), fixtures::f_ou(), fixtures::g_ou2());
  const Eigen::Index n = sol.h.size();
  for (Eigen::Index m = 0; m < n; ++m) ASSERT_NEAR(std::abs(sol.h[m] - std::conj(sol.h[n - 1 - m])), 0.0, 1e-14);
}

TEST(FilterWeights, ZeroCharacteristic) {
  P1Setup s;
  const Vector v = filter_weights(CVector::Zero(s.f.size()), s.p.observation_basis(), s.p.frequencies());
  EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FilterWeights, ParsevalOnFullLattice) {
  // With Δt = π/Λ and one full period of lags the transform pair is unitary.
  const FilterProblem p = fixtures::p1();
  const auto sol = solve_filter(p, fixtures::f_ou(), fixtures::g_ou2());
  const FrequencyGrid& grid = p.frequencies();
  const double dt = M_PI / grid.cutoff();
  const double period = 2.0 * M_PI / grid.spacing();
  std::vector<double> t;
  for (long k = 0; k < static_cast<long>(std::llround(period / dt)); ++k) t.push_back(-0.5 * period + k * dt);
  const Vector v = filter_weights(sol.h, HalfBasis(grid, t), grid);
  const double v_energy = dt * v.squaredNorm();
  const double h_energy = grid.quadrature() * sol.h.cwiseAbs2().sum();
  EXPECT_NEAR(v_energy / h_energy, 1.0, 1e-3);
}

TEST(SolveFilter, NoiselessNoGapsIsExact) {
  const FilterProblem p(MissingPattern{}, fixtures::a_exp(), fixtures::coarse());
  const auto sol = solve_filter(p, fixtures::f_ou(), SpectralDensity::zero());
  EXPECT_LE(sol.delta, 1e-6 * sol.var_a_xi);
  // h ≈ A in the f-weighted norm, which is the error itself.
  const Vector f = eval_density(fixtures::f_ou(), p.frequencies());
  EXPECT_LE(p.frequencies().quadrature() * (sol.h - sol.A).cwiseAbs2().dot(f), 1e-6 * sol.var_a_xi);
}

TEST(SolveFilter, HorizonOptionMatchesTruncatedWeight) {
  const FilterProblem p = fixtures::p1();
  FilterOptions o;
  o.horizon = 1.0;
  const auto via_option = solve_filter(p, fixtures::f_ou(), fixtures::g_ou2(), o);
  const FilterProblem direct_p(fixtures::gap1(), truncate_weight(fixtures::a_exp(), 1.0), fixtures::coarse());
  const auto direct = solve_filter(direct_p, fixtures::f_ou(), fixtures::g_ou2());
  EXPECT_EQ(via_option.delta, direct.delta);
  EXPECT_EQ((via_option.h - direct.h).cwiseAbs().maxCoeff(), 0.0);
  const auto full = solve_filter(p, fixtures::f_ou(), fixtures::g_ou2());
  EXPECT_LT(via_option.delta, full.delta);
}

TEST(SolveFilter, ScaleInvariance) {
  const FilterProblem p = fixtures::p1();
  const auto base = solve_filter(p, fixtures::f_ou(), fixtures::g_ou2());
  const auto tripled = solve_filter(p, SpectralDensity::scaled(fixtures::f_ou(), 3.0),
                                    SpectralDensity::scaled(fixtures::g_ou2(), 3.0));
  EXPECT_LE((tripled.h - base.h).cwiseAbs().maxCoeff(), 1e-8 * base.h.cwiseAbs().maxCoeff());
  EXPECT_NEAR(tripled.delta / base.delta, 3.0, 3e-8);
}

TEST(SolveFilter, NoiseMonotonicity) {
  const FilterProblem p = fixtures::p1();
  const auto base = solve_filter(p, fixtures::f_ou(), fixtures::g_ou2());
  const auto noisier = solve_filter(p, fixtures::f_ou(), SpectralDensity::scaled(fixtures::g_ou2(), 2.0));
  EXPECT_GE(noisier.delta, base.delta);
}

TEST(SolveFilter, RandomRationalDualForms) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  const FilterProblem p = fixtures::p1();
  for (int i = 0; i < 4; ++i) {
    const auto f = SpectralDensity::rational({u(rng), u(rng)}, {u(rng), u(rng), u(rng)});
    const auto g = SpectralDensity::rational({u(rng)}, {u(rng), u(rng)});
    const auto sol = solve_filter(p, f, g);
    EXPECT_LE(sol.diagnostics.dual_gap, 1e-6 * (1.0 + sol.delta));
    EXPECT_GE(sol.delta, -1e-10);
  }
}

TEST(SolveFilter, RefusesWhenMinimalityFails) {
  const auto steep = SpectralDensity::rational({1.0}, {1.0, 5.0, 10.0, 10.0, 5.0, 1.0});
  try {
    solve_filter(fixtures::p1(), steep, SpectralDensity::zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MinimalityViolated);
  }
}

TEST(SolveFilter, AsPrintedKernelReported) {
  FilterOptions o;
  o.kernel = RGapKernel::as_printed;
  const auto sol = solve_filter(fixtures::p1(), fixtures::f_ou(), fixtures::g_ou2(), o);
  EXPECT_EQ(sol.kernel, RGapKernel::as_printed);
  EXPECT_TRUE(std::isfinite(sol.delta));
}
