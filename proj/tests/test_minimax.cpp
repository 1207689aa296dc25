#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace rfl;
using fixtures::error_kind;

namespace {

struct Grids {
  FilterProblem p = fixtures::p1();
  const FrequencyGrid& grid = p.frequencies();
  Vector f = eval_density(fixtures::f_ou(), grid);
  Vector g = eval_density(fixtures::g_ou2(), grid);
};

DensityClass contamination(double eps, double factor, const FrequencyGrid& grid) {
  const double p = power(eval_density(fixtures::f_ou(), grid), grid);
  return DensityClass::contamination(fixtures::f_ou(), eps, factor * p);
}

}  // namespace

TEST(Sensitivity, EqualDensitiesNoCorrection) {
  Grids s;
  const CVector A = weight_transform(s.p);
  const CVector zero = CVector::Zero(A.size());
  const Vector quarter = 0.25 * A.cwiseAbs2();
  EXPECT_LE((sensitivity_hf(A, zero, s.f, s.f) - quarter).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((sensitivity_hg(A, zero, s.f, s.f) - quarter).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(sensitivity_hf(zero, zero, s.f, s.g).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sensitivity_hg(zero, zero, s.f, s.g).cwiseAbs().maxCoeff(), 0.0);
  const Vector none = Vector::Zero(s.f.size());
  EXPECT_EQ(error_kind([&] { sensitivity_hf(A, zero, none, none); }), ErrorKind::SingularDensitySum);
}

TEST(Sensitivity, CrossMseMatchesFilterDelta) {
  Grids s;
  const auto sol = solve_filter(s.p, fixtures::f_ou(), fixtures::g_ou2());
  const Vector hf = sensitivity_hf(sol.A, sol.C, s.f, s.g);
  const Vector hg = sensitivity_hg(sol.A, sol.C, s.f, s.g);
  EXPECT_GE(hf.minCoeff(), 0.0);
  EXPECT_GE(hg.minCoeff(), 0.0);
  EXPECT_NEAR(mse_cross(hf, hg, s.f, s.g, s.grid), sol.delta_spectral, 1e-12 * sol.delta_spectral);
  EXPECT_NEAR(mse_cross(hf, hg, s.f, s.g, s.grid), sol.delta, 1e-8 * sol.delta);
}

TEST(MseCross, Linear) {
  Grids s;
  const auto sol = solve_filter(s.p, fixtures::f_ou(), fixtures::g_ou2());
  const Vector hf = sensitivity_hf(sol.A, sol.C, s.f, s.g);
  const Vector hg = sensitivity_hg(sol.A, sol.C, s.f, s.g);
  const Vector zero = Vector::Zero(s.f.size());
  const double first = mse_cross(hf, hg, s.f, zero, s.grid);
  EXPECT_DOUBLE_EQ(mse_cross(hf, hg, 2.0 * s.f, zero, s.grid), 2.0 * first);
  EXPECT_NEAR(mse_cross(hf, hg, 2.0 * s.f, s.g, s.grid) - mse_cross(hf, hg, s.f, s.g, s.grid), first,
              1e-14);
}

TEST(ClassProject, Examples) {
  Grids s;
  const double q = s.grid.quadrature();
  const auto l2 = DensityClass::l2_ball(fixtures::f_ou(), 0.05);
  EXPECT_EQ(class_project(s.f, l2, s.f, s.grid), s.f);
  // Deviation with squared norm 2ε lands on the boundary.
  Vector dev = Vector::Ones(s.f.size());
  dev *= std::sqrt(2.0 * 0.05 / (q * dev.squaredNorm()));
  const Vector projected = class_project(s.f + dev, l2, s.f, s.grid);
  EXPECT_NEAR(class_budget(l2, projected, s.f, s.grid), 0.05, 1e-12);

  const auto l1 = DensityClass::l1_ball(fixtures::f_ou(), 0.05);
  const Vector far = class_project(2.0 * s.f, l1, s.f, s.grid);
  EXPECT_NEAR(class_budget(l1, far, s.f, s.grid), 0.05, 1e-12);
  const Vector near = s.f * (1.0 + 0.01 / (q * s.f.sum()));
  EXPECT_EQ(class_project(near, l1, s.f, s.grid), near);

  const auto c0 = contamination(0.0, 1.0, s.grid);
  EXPECT_EQ(class_project(3.0 * s.f, c0, s.f, s.grid), s.f);

  const auto known = DensityClass::known(fixtures::g_ou2());
  EXPECT_EQ(class_project(s.f, known, s.g, s.grid), s.g);
}

TEST(ClassProject, ContaminationMembership) {
  Grids s;
  const auto cls = contamination(0.1, 1.2, s.grid);
  const Vector out = class_project(5.0 * s.f, cls, s.f, s.grid);
  EXPECT_GE((out - 0.9 * s.f).minCoeff(), -1e-15);
  EXPECT_LE(class_budget(cls, out, s.f, s.grid), cls.power_bound() * (1.0 + 1e-12));
  const Vector small = class_project(Vector::Zero(s.f.size()), cls, s.f, s.grid);
  EXPECT_LE((small - 0.9 * s.f).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DensityClassTest, Validation) {
  Grids s;
  EXPECT_EQ(error_kind([] { DensityClass::l1_ball(fixtures::f_ou(), -0.1); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(error_kind([] { DensityClass::contamination(fixtures::f_ou(), 1.5, 1.0); }),
            ErrorKind::InvalidArgument);
  const auto bad = contamination(0.1, 0.5, s.grid);
  EXPECT_EQ(error_kind([&] { require_feasible(bad, s.f, s.grid); }), ErrorKind::InfeasibleClass);
  EXPECT_EQ(error_kind([&] { lfd_solve(s.p, bad, DensityClass::known(fixtures::g_ou2())); }),
            ErrorKind::InfeasibleClass);
  EXPECT_TRUE(DensityClass::known(fixtures::f_ou()).singleton());
  EXPECT_TRUE(DensityClass::l2_ball(fixtures::f_ou(), 0.0).singleton());
  EXPECT_FALSE(DensityClass::l2_ball(fixtures::f_ou(), 0.1).singleton());
}

TEST(LfdSolve, ZeroRadiusIsNominal) {
  Grids s;
  const auto nominal = solve_filter(s.p, fixtures::f_ou(), fixtures::g_ou2());
  const auto saddle = lfd_solve(s.p, DensityClass::l1_ball(fixtures::f_ou(), 0.0),
                                DensityClass::l2_ball(fixtures::g_ou2(), 0.0));
  EXPECT_TRUE(saddle.converged);
  EXPECT_EQ(saddle.iterations, 0u);
  EXPECT_EQ(saddle.f0, s.f);
  EXPECT_EQ(saddle.g0, s.g);
  EXPECT_NEAR(saddle.delta(), nominal.delta, 1e-8 * nominal.delta);
  const auto report = saddle_verify(s.p, saddle, DensityClass::l1_ball(fixtures::f_ou(), 0.0),
                                    DensityClass::l2_ball(fixtures::g_ou2(), 0.0), {20, 5});
  EXPECT_TRUE(report.pass());
}

TEST(LfdSolve, ContaminationZeroEpsIsCenter) {
  Grids s;
  const auto saddle = lfd_solve(s.p, contamination(0.0, 1.0, s.grid), DensityClass::known(fixtures::g_ou2()));
  EXPECT_TRUE(saddle.converged);
  EXPECT_EQ(saddle.f0, s.f);
}

class LfdPairs : public ::testing::TestWithParam<int> {
 protected:
  std::pair<DensityClass, DensityClass> classes(double eps, const FrequencyGrid& grid) const {
    switch (GetParam()) {
      case 0: return {contamination(eps, 1.2, grid), DensityClass::known(fixtures::g_ou2())};
      case 1: return {DensityClass::l1_ball(fixtures::f_ou(), eps), DensityClass::l2_ball(fixtures::g_ou2(), eps)};
      default: return {DensityClass::l2_ball(fixtures::f_ou(), eps), DensityClass::l2_ball(fixtures::g_ou2(), eps)};
    }
  }
};

TEST_P(LfdPairs, ConvergesToVerifiedSaddle) {
  Grids s;
  const auto [cf, cg] = classes(0.05, s.grid);
  const auto saddle = lfd_solve(s.p, cf, cg);
  ASSERT_TRUE(saddle.converged);
  EXPECT_LE(saddle.iterations, 200u);
  EXPECT_LE(saddle.budget_residual_f, 1e-4);
  EXPECT_LE(saddle.budget_residual_g, 1e-4);
  EXPECT_GE(saddle.alpha1, 0.0);
  EXPECT_GE(saddle.alpha2, 0.0);
  EXPECT_LE(saddle.slackness_f, 1e-2);
  EXPECT_LE(saddle.slackness_g, 1e-2);
  EXPECT_GE(saddle.delta(), saddle.delta_nominal - 1e-10);
  EXPECT_GE(saddle.f0.minCoeff(), 0.0);
  EXPECT_GE(saddle.g0.minCoeff(), 0.0);
  const auto report = saddle_verify(s.p, saddle, cf, cg, {50, 10});
  EXPECT_TRUE(report.left_pass) << report.left_violation << " tol " << report.tolerance;
  EXPECT_TRUE(report.right_pass) << report.right_violation << " tol " << report.tolerance;
}

TEST_P(LfdPairs, MonotoneInRadius) {
  Grids s;
  double previous = 0.0;
  for (double eps : {0.0, 0.05, 0.1}) {
    const auto [cf, cg] = classes(eps, s.grid);
    const auto saddle = require_converged(lfd_solve(s.p, cf, cg));
    EXPECT_GE(saddle.delta(), previous - 1e-10) << "eps " << eps;
    previous = saddle.delta();
  }
}

INSTANTIATE_TEST_SUITE_P(Classes, LfdPairs, ::testing::Values(0, 1, 2));

TEST(LfdSolve, IterationCapReportsNoConvergence) {
  Grids s;
  LfdOptions o;
  o.max_iter = 2;
  const auto cf = DensityClass::l2_ball(fixtures::f_ou(), 0.05);
  const auto cg = DensityClass::l2_ball(fixtures::g_ou2(), 0.05);
  const auto saddle = lfd_solve(s.p, cf, cg, o);
  EXPECT_FALSE(saddle.converged);
  EXPECT_EQ(saddle.iterations, 2u);
  EXPECT_TRUE(std::isfinite(saddle.fixed_point_residual));
  EXPECT_EQ(error_kind([&] { require_converged(saddle); }), ErrorKind::NoConvergence);
}

TEST(LfdSolve, RejectsNonMinimalCenters) {
  Grids s;
  const auto steep = SpectralDensity::rational({1.0}, {1.0, 5.0, 10.0, 10.0, 5.0, 1.0});
  EXPECT_EQ(error_kind([&] {
              lfd_solve(s.p, DensityClass::l2_ball(steep, 0.01), DensityClass::known(SpectralDensity::zero()));
            }),
            ErrorKind::MinimalityViolated);
}

TEST(SaddleVerify, DeterministicForSeed) {
  Grids s;
  const auto cf = DensityClass::l2_ball(fixtures::f_ou(), 0.05);
  const auto cg = DensityClass::l2_ball(fixtures::g_ou2(), 0.05);
  const auto saddle = lfd_solve(s.p, cf, cg);
  const auto a = saddle_verify(s.p, saddle, cf, cg, {30, 5, 9});
  const auto b = saddle_verify(s.p, saddle, cf, cg, {30, 5, 9});
  EXPECT_EQ(a.left_violation, b.left_violation);
  EXPECT_EQ(a.right_violation, b.right_violation);
  EXPECT_EQ(a.samples, 30u);
}
