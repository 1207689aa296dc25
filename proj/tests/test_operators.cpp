#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rfl/filtering.hpp"

using namespace rfl;

namespace {

struct P1Setup {
  FilterProblem p = fixtures::p1();
  Vector f = eval_density(fixtures::f_ou(), p.frequencies());
  Vector g = eval_density(fixtures::g_ou2(), p.frequencies());
};

/// Reference kernel matrix from the full complex exponential matrix:
/// K_{jk} = (Δλ/2π) Σ_m w_m e^{iλ_m(sign·u_k − t_j)} W_k, with sign = −1 for u+t.
Matrix reference_operator(const FilterProblem& p, const Vector& w, bool mirrored_columns_all,
                          const std::vector<bool>& mirrored_column) {
  const auto& t = p.target().points;
  const Eigen::MatrixXcd E = fourier_matrix(p.frequencies(), t);
  const double q = p.frequencies().quadrature();
  const Eigen::Index n = static_cast<Eigen::Index>(t.size());
  Matrix out(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const bool mir = mirrored_columns_all || mirrored_column[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < n; ++j) {
      std::complex<double> s = 0.0;
      for (Eigen::Index m = 0; m < E.rows(); ++m) {
        const std::complex<double> eu = mir ? std::conj(E(m, k)) : E(m, k);
        s += w[m] * eu * std::conj(E(m, j));
      }
      out(j, k) = q * s.real() * p.target().weights[k];
    }
  }
  return out;
}

double rel_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(FourierMatrix, UnitModulusAndOriginColumn) {
  const FrequencyGrid grid(8.0, 64);
  const std::vector<double> t{-1.0, 0.0, 2.5};
  const auto E = fourier_matrix(grid, t);
  EXPECT_NEAR((E.cwiseAbs().array() - 1.0).abs().maxCoeff(), 0.0, 1e-15);
  for (Eigen::Index m = 0; m < E.rows(); ++m) EXPECT_EQ(E(m, 1), std::complex<double>(1.0, 0.0));
}

TEST(AssembleB, ConstantDensityIsGramForm) {
  const FilterProblem p = fixtures::p1();
  const Eigen::Index n = static_cast<Eigen::Index>(p.frequencies().size());
  const Vector half = Vector::Constant(n, 0.5);
  const Matrix B = assemble_B(p, half, half);
  const auto E = fourier_matrix(p.frequencies(), p.target().points);
  const Matrix gram = (p.frequencies().quadrature() * (E.adjoint() * E)).real() * p.target().weights.asDiagonal();
  EXPECT_LE(rel_diff(B, gram), 1e-12);
}

TEST(AssembleB, SymmetricKernelAndPsd) {
  P1Setup s;
  const Matrix B = assemble_B(s.p, s.f, s.g);
  const Matrix G = B * s.p.target().weights.cwiseInverse().asDiagonal();
  EXPECT_LE((G - G.transpose()).cwiseAbs().maxCoeff(), 1e-12 * G.norm());
  const double mineig = Eigen::SelfAdjointEigenSolver<Matrix>(G).eigenvalues().minCoeff();
  EXPECT_GE(mineig, -1e-10 * G.norm());
}

TEST(AssembleB, MatchesComplexReference) {
  P1Setup s;
  const Vector inv = (s.f + s.g).cwiseInverse();
  EXPECT_LE(rel_diff(assemble_B(s.p, s.f, s.g), reference_operator(s.p, inv, false, std::vector<bool>(s.p.target().points.size(), false))), 1e-11);
}

TEST(AssembleR, BothKernelsMatchComplexReference) {
  P1Setup s;
  const Vector w = s.f.cwiseQuotient(s.f + s.g);
  EXPECT_LE(rel_diff(assemble_R(s.p, s.f, s.g, RGapKernel::mirrored),
                     reference_operator(s.p, w, true, s.p.target().in_gap)),
            1e-11);
  EXPECT_LE(rel_diff(assemble_R(s.p, s.f, s.g, RGapKernel::as_printed),
                     reference_operator(s.p, w, false, s.p.target().in_gap)),
            1e-11);
}

TEST(AssembleR, NoGapsEqualDensitiesIsHalfB) {
  const FilterProblem p(MissingPattern{}, fixtures::a_exp(), fixtures::coarse());
  const double K = 3.0;
  const Vector half = Vector::Constant(static_cast<Eigen::Index>(p.frequencies().size()), K / 2.0);
  const Matrix R = assemble_R(p, half, half, RGapKernel::as_printed);
  const Matrix B = assemble_B(p, half, half);
  EXPECT_LE(rel_diff(R, (K / 2.0) * B), 1e-12);
}

TEST(AssembleR, ApplyMatchesMatrix) {
  P1Setup s;
  for (auto kernel : {RGapKernel::mirrored, RGapKernel::as_printed}) {
    const Vector dense = assemble_R(s.p, s.f, s.g, kernel) * s.p.extended_weight();
    const Vector fast = apply_R(s.p, s.f, s.g, s.p.extended_weight(), kernel);
    EXPECT_LE((dense - fast).cwiseAbs().maxCoeff(), 1e-12 * dense.cwiseAbs().maxCoeff());
  }
  const Vector zero = Vector::Zero(s.p.target().size());
  EXPECT_EQ(apply_R(s.p, s.f, s.g, zero).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleR, FiniteAndBounded) {
  P1Setup s;
  const Matrix R = assemble_R(s.p, s.f, s.g);
  const Matrix B = assemble_B(s.p, s.f, s.g);
  EXPECT_TRUE(R.allFinite());
  // Spectral norms of the symmetric kernels: weight f/(f+g) ≤ max(f)·1/(f+g).
  const Matrix Gb = B * s.p.target().weights.cwiseInverse().asDiagonal();
  const Matrix Gr = R * s.p.target().weights.cwiseInverse().asDiagonal();
  const double nb = Eigen::SelfAdjointEigenSolver<Matrix>(Gb).eigenvalues().cwiseAbs().maxCoeff();
  const double nr = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (Gr + Gr.transpose())).eigenvalues().cwiseAbs().maxCoeff();
  EXPECT_LE(nr, nb * s.f.maxCoeff());
}

TEST(AssembleQ, ZeroNoiseAndEqualDensities) {
  P1Setup s;
  const Vector zero = Vector::Zero(s.f.size());
  EXPECT_EQ(assemble_Q(s.p, s.f, zero).cwiseAbs().maxCoeff(), 0.0);
  const Matrix Q = assemble_Q(s.p, s.f, s.f);
  const Matrix ref = reference_operator(s.p, 0.5 * s.f, false, std::vector<bool>(s.p.target().points.size(), false));
  EXPECT_LE(rel_diff(Q, ref), 1e-11);
}

TEST(AssembleQ, Psd) {
  P1Setup s;
  const Matrix G = assemble_Q(s.p, s.f, s.g) * s.p.target().weights.cwiseInverse().asDiagonal();
  const double mineig = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (G + G.transpose())).eigenvalues().minCoeff();
  EXPECT_GE(mineig, -1e-10 * G.norm());
}

TEST(AssembleOperators, SingularDensitySum) {
  P1Setup s;
  Vector f = s.f;
  Vector g = Vector::Zero(f.size());
  f[10] = 0.0;
  try {
    assemble_B(s.p, f, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularDensitySum);
  }
}

TEST(SolveC, ZeroRightHandSide) {
  P1Setup s;
  const Matrix B = assemble_B(s.p, s.f, s.g);
  const auto r = solve_c(B, s.p.target().weights, Vector::Zero(B.rows()), s.p.target().constrained);
  EXPECT_EQ(r.c.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SolveC, ResidualAndIterativeAgreement) {
  P1Setup s;
  const Matrix B = assemble_B(s.p, s.f, s.g);
  const Vector Ra = apply_R(s.p, s.f, s.g, s.p.extended_weight());
  const auto& K = s.p.target().constrained;
  const auto r = solve_c(B, s.p.target().weights, Ra, K);
  EXPECT_FALSE(r.regularized);
  EXPECT_LE(r.residual, 1e-8);
  double num = 0.0;
  double den = 0.0;
  const Vector Bc = B * r.c;
  for (auto k : K) {
    num += (Bc[k] - Ra[k]) * (Bc[k] - Ra[k]);
    den += Ra[k] * Ra[k];
  }
  EXPECT_LE(std::sqrt(num / den), 1e-8);
  EXPECT_EQ(r.c[s.p.target().origin], 0.0);
  const Vector c2 = solve_c_iterative(B, s.p.target().weights, Ra, K);
  EXPECT_LE((c2 - r.c).norm(), 1e-6 * r.c.norm());
}

TEST(SolveC, RidgeWhenIllConditioned) {
  P1Setup s;
  const Matrix B = assemble_B(s.p, s.f, s.g);
  const Vector Ra = apply_R(s.p, s.f, s.g, s.p.extended_weight());
  SolveOptions o;
  o.cond_max = 10.0;  // force the ridge path
  o.tol_solve = 1.0;
  const auto r = solve_c(B, s.p.target().weights, Ra, s.p.target().constrained, o);
  EXPECT_TRUE(r.regularized);
  EXPECT_GT(r.ridge, 0.0);
  o.tol_solve = 1e-30;
  try {
    solve_c(B, s.p.target().weights, Ra, s.p.target().constrained, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IllConditioned);
  }
}

TEST(Operators, ScaleCovariance) {
  P1Setup s;
  const double c = 3.0;
  const Vector f3 = c * s.f;
  const Vector g3 = c * s.g;
  EXPECT_LE(rel_diff(assemble_B(s.p, f3, g3), assemble_B(s.p, s.f, s.g) / c), 1e-12);
  EXPECT_LE(rel_diff(assemble_R(s.p, f3, g3), assemble_R(s.p, s.f, s.g)), 1e-12);
  EXPECT_LE(rel_diff(assemble_Q(s.p, f3, g3), c * assemble_Q(s.p, s.f, s.g)), 1e-12);
  const auto& W = s.p.target().weights;
  const auto& K = s.p.target().constrained;
  const Vector a = s.p.extended_weight();
  const Vector c1 = solve_c(assemble_B(s.p, s.f, s.g), W, apply_R(s.p, s.f, s.g, a), K).c;
  const Vector c3 = solve_c(assemble_B(s.p, f3, g3), W, apply_R(s.p, f3, g3, a), K).c;
  for (Eigen::Index k = 0; k < c1.size(); ++k) {
    EXPECT_NEAR(c3[k], c * c1[k], 1e-9 * std::max(1.0, std::abs(c * c1[k])));
  }
}

TEST(Operators, QuadraticFormStableUnderJointRefinement) {
  auto form = [](Discretization d) {
    const FilterProblem p = fixtures::p1(d);
    const Vector f = eval_density(fixtures::f_ou(), p.frequencies());
    const Vector g = eval_density(fixtures::g_ou2(), p.frequencies());
    const Vector Ra = apply_R(p, f, g, p.extended_weight());
    const Vector c = solve_c(assemble_B(p, f, g), p.target().weights, Ra, p.target().constrained).c;
    return mse_quadratic(p.target(), p.extended_weight(), Ra, c, apply_Q(p, f, g, p.extended_weight()));
  };
  const double coarse = form({32.0, 2048, 0.1, 8.0, 12.0});
  const double fine = form({64.0, 4096, 0.05, 8.0, 12.0});
  EXPECT_LE(std::abs(coarse - fine), 0.01 * std::abs(fine));
}

TEST(Kernel, ParseAndName) {
  EXPECT_EQ(parse_kernel("mirrored"), RGapKernel::mirrored);
  EXPECT_EQ(parse_kernel("as_printed"), RGapKernel::as_printed);
  EXPECT_STREQ(to_string(RGapKernel::as_printed), "as_printed");
  EXPECT_THROW(parse_kernel("other"), Error);
}
