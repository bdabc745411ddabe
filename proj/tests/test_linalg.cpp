#include <cmath>

#include <gtest/gtest.h>

#include "newton_lab/linalg.hpp"
#include "newton_lab/random.hpp"

using namespace newton_lab;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  return a;
}

// Diagonally dominant by a factor of two, so the condition number stays small.
Matrix well_conditioned(Rng& rng, std::size_t n) {
  Matrix a = random_matrix(rng, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += (rng.coin() ? 2.0 : -2.0) * static_cast<double>(n);
  return a;
}

Vector random_vector(Rng& rng, std::size_t n) {
  Vector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST(LuSolve, Identity) {
  const Vector x = lu_solve(Matrix::identity(2), Vector{5.0, 7.0});
  EXPECT_EQ(x, (Vector{5.0, 7.0}));
}

TEST(LuSolve, TwoByTwo) {
  const Vector x = lu_solve(Matrix{{2.0, 1.0}, {1.0, 3.0}}, Vector{5.0, 10.0});
  EXPECT_NEAR(x[0], 1.0, 4 * unit_roundoff);
  EXPECT_NEAR(x[1], 3.0, 8 * unit_roundoff);
}

TEST(LuSolve, RankDeficientThrows) {
  EXPECT_THROW(lu_solve(Matrix{{1.0, 1.0}, {1.0, 1.0}}, Vector{1.0, 2.0}), SingularMatrix);
  EXPECT_THROW(lu_solve(Matrix{{1.0, 1.0}, {1.0, 1.0}}, Vector{0.0, 0.0}), SingularMatrix);
}

TEST(LuSolve, PivotThreshold) {
  const Matrix a{{1e-10, 0.0}, {0.0, 1.0}};
  EXPECT_NO_THROW(lu_solve(a, Vector{1.0, 1.0}));
  EXPECT_THROW(lu_solve(a, Vector{1.0, 1.0}, 1e-8), SingularMatrix);
}

TEST(LuSolve, NeedsPivoting) {
  const Vector x = lu_solve(Matrix{{0.0, 1.0}, {1.0, 0.0}}, Vector{3.0, 4.0});
  EXPECT_EQ(x, (Vector{4.0, 3.0}));
}

TEST(LuSolve, BackwardStableOnRandomSystems) {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 50.0);
    const Matrix a = well_conditioned(rng, n);
    const Vector b = random_vector(rng, n);
    const Vector x = lu_solve(a, b);
    // |A|_F / sqrt(n) is a lower bound for |A|_2, so this is the stricter test.
    const double a2 = norm_frobenius(a) / std::sqrt(static_cast<double>(n));
    EXPECT_LE(norm2(a * x - b), 1e3 * unit_roundoff * a2 * norm2(x)) << "n = " << n;
  }
}

TEST(CholeskySolve, Diagonal) {
  const Vector x = cholesky_solve(Matrix{{4.0, 0.0}, {0.0, 9.0}}, Vector{8.0, 27.0});
  EXPECT_EQ(x, (Vector{2.0, 3.0}));
}

TEST(CholeskySolve, Identity) {
  EXPECT_EQ(cholesky_solve(Matrix::identity(3), (Vector{1.0, 2.0, 3.0})), (Vector{1.0, 2.0, 3.0}));
}

TEST(CholeskySolve, IndefiniteThrows) {
  EXPECT_THROW(cholesky_solve(Matrix{{1.0, 2.0}, {2.0, 1.0}}, Vector{1.0, 1.0}), NotPositiveDefinite);
}

TEST(CholeskySolve, AsymmetryBeyondToleranceThrows) {
  EXPECT_THROW(CholeskyFactorization(Matrix{{2.0, 1.0}, {1.1, 2.0}}), NotPositiveDefinite);
  // Asymmetry at the level of rounding is accepted.
  EXPECT_NO_THROW(CholeskyFactorization(Matrix{{2.0, 1.0}, {1.0 + 2 * unit_roundoff, 2.0}}));
}

TEST(CholeskySolve, AgreesWithLuOnSpd) {
  Rng rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 30.0);
    const Matrix b = random_matrix(rng, n);
    Matrix s = b * b.transpose();
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 1.0;
    const Vector rhs = random_vector(rng, n);
    const Vector xc = cholesky_solve(s, rhs);
    const Vector xl = lu_solve(s, rhs);
    EXPECT_LE(norm2(xc - xl), 1e-8 * norm2(xl));
  }
}

TEST(Norms, Examples) {
  EXPECT_EQ(norm2(Vector{3.0, 4.0}), 5.0);
  EXPECT_EQ(norm2(Vector(4)), 0.0);
  EXPECT_EQ(norm2(Vector()), 0.0);
  EXPECT_EQ(dot(Vector{1.0, 2.0}, Vector{3.0, 4.0}), 11.0);
}

TEST(Norms, NoOverflowOrUnderflow) {
  EXPECT_DOUBLE_EQ(norm2(Vector{3e200, 4e200}), 5e200);
  EXPECT_DOUBLE_EQ(norm2(Vector{3e-200, 4e-200}), 5e-200);
}

TEST(Norms, HomogeneousAndSubadditive) {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 20.0);
    const Vector a = random_vector(rng, n);
    const Vector b = random_vector(rng, n);
    const double s = rng.uniform(-10.0, 10.0);
    EXPECT_NEAR(norm2(s * a), std::abs(s) * norm2(a), 4 * unit_roundoff * std::abs(s) * norm2(a));
    EXPECT_LE(norm2(a + b), (norm2(a) + norm2(b)) * (1.0 + 4 * unit_roundoff));
  }
}

TEST(MatrixOps, ProductsAndTranspose) {
  const Matrix a{{1.0, 2.0}, {3.0, 4.0}};
  EXPECT_EQ(a * (Vector{1.0, 1.0}), (Vector{3.0, 7.0}));
  const Matrix p = a * a.transpose();
  EXPECT_EQ(p(0, 1), 11.0);
  EXPECT_EQ(p(1, 0), 11.0);
  EXPECT_EQ(norm_inf(a), 7.0);
  EXPECT_DOUBLE_EQ(norm_frobenius(a), std::sqrt(30.0));
}
