#include <cmath>

#include <gtest/gtest.h>

#include "newton_lab/random.hpp"
#include "newton_lab/theory.hpp"

using namespace newton_lab;
using namespace newton_lab::theory;

namespace {

TheoryParams unit_params(double D = 0.0, double E = 0.0) { return {1.0, 1.0, 1.0, D, E, 1.0}; }

// Square-root constants near the zero: L = 2, K|z| = 1/2, MK = 1 (z = 1).
TheoryParams sqrt_params(double E) { return {0.5, 2.0, 2.0, 0.0, E, 1.0}; }

double quadratic(const TheoryParams& p, double r) {
  return p.D - (1.0 - p.correction_term()) * r + 0.5 * p.curvature_term() * r * r;
}

}  // namespace

TEST(ErrorOperator, WorkedExample) {
  const auto e = error_operator(Vector{3.0, 4.0}, Vector{3.0, 5.0});
  const Matrix m = e.matrix();
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_EQ(m(0, 1), 0.0);
  EXPECT_NEAR(m(1, 0), 0.12, 1e-16);
  EXPECT_NEAR(m(1, 1), 0.16, 1e-16);
  EXPECT_NEAR(e.norm2(), 0.2, 1e-16);
  EXPECT_EQ(e.apply_shifted(Vector{3.0, 4.0}), (Vector{3.0, 5.0}));
}

TEST(ErrorOperator, IdenticalVectorsGiveZero) {
  const auto e = error_operator(Vector{1.5, -2.0, 7.0}, Vector{1.5, -2.0, 7.0});
  EXPECT_EQ(e.norm2(), 0.0);
  EXPECT_EQ(norm_frobenius(e.matrix()), 0.0);
}

TEST(ErrorOperator, UnitNorm) {
  EXPECT_EQ(error_operator(Vector{1.0, 0.0}, Vector{1.0, 1.0}).norm2(), 1.0);
}

TEST(ErrorOperator, ZeroReferenceThrows) {
  EXPECT_THROW(error_operator(Vector{0.0, 0.0}, Vector{1.0, 2.0}), ZeroReference);
}

TEST(ErrorOperator, RandomPairsReconstructAndMatchNorm) {
  Rng rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 100.0);
    Vector x(n);
    for (double& v : x) v = rng.normal();
    const double rho = std::exp(rng.uniform(std::log(1e-12), std::log(0.5)));
    const Vector y = x + rho * norm2(x) * rng.unit_direction(n);
    const auto e = error_operator(x, y);
    EXPECT_LE(norm2(e.apply_shifted(x) - y), 32 * unit_roundoff * norm2(y));
    const double closed_form = norm2(y - x) * norm2(x) / dot(x, x);
    EXPECT_LE(std::abs(e.norm2() - closed_form), 32 * unit_roundoff * closed_form);
  }
}

TEST(ErrorBoundStep, Examples) {
  EXPECT_DOUBLE_EQ(error_bound_step(0.1, unit_params()), 0.005);
  EXPECT_DOUBLE_EQ(error_bound_step(0.1, unit_params(0.0, 0.01)), 0.006);
  EXPECT_EQ(error_bound_step(0.0, unit_params(1e-16)), 1e-16);
}

TEST(ErrorBoundStep, ReducesToNewtonBound) {
  Rng rng(22);
  for (int i = 0; i < 100; ++i) {
    const TheoryParams p{rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 3), 0.0, 0.0,
                         rng.uniform(0.1, 3)};
    const double r = rng.uniform(0.0, 0.5);
    EXPECT_EQ(error_bound_step(r, p), 0.5 * p.L * p.K * p.z_norm * r * r);
  }
}

TEST(StagnationRoots, WorkedExampleIncludesOnePlusD) {
  // Roots of 0.01 - r + 0.505 r^2, with 0.505 = 1/2 (1 + D).
  const auto r = stagnation_roots(unit_params(0.01));
  EXPECT_NEAR(r.minus, 0.010051016581835811, 1e-17);
  EXPECT_NEAR(r.plus, 1.9701470032201444, 4e-16);
}

TEST(StagnationRoots, NoRoundingFloor) {
  const auto r = stagnation_roots(unit_params());
  EXPECT_EQ(r.minus, 0.0);
  EXPECT_EQ(r.plus, 2.0);
  const TheoryParams p{0.5, 3.0, 1.0, 0.0, 0.0, 2.0};
  EXPECT_DOUBLE_EQ(stagnation_roots(p).plus, 2.0 / (p.L * p.K * p.z_norm));
}

TEST(StagnationRoots, Errors) {
  EXPECT_THROW(stagnation_roots(unit_params(0.6)), NoRealRoots);
  EXPECT_THROW(stagnation_roots({1.0, 0.0, 1.0, 0.01, 0.0, 1.0}), DegenerateQuadratic);
  EXPECT_THROW(stagnation_roots({-1.0, 1.0, 1.0, 0.01, 0.0, 1.0}), DomainError);
}

TEST(StagnationRoots, AccurateForTinyD) {
  // Cancellation in the textbook formula would lose every digit here.
  const auto r = stagnation_roots(unit_params(unit_roundoff));
  EXPECT_NEAR(r.minus, unit_roundoff, 4 * unit_roundoff * unit_roundoff);
}

TEST(StagnationRoots, ResidualAndOrderOverParameterGrid) {
  for (double D : {0.0, unit_roundoff, 1e-12, 1e-8, 1e-4, 1e-2, 0.1})
    for (double E : {0.0, 1e-8, 1e-4, 1e-2, 0.1, 0.3})
      for (double L : {0.5, 1.0, 2.0}) {
        const TheoryParams p{1.0, L, 1.0, D, E, 1.0};
        const auto r = stagnation_roots(p);
        EXPECT_LE(r.minus, r.plus);
        const double limit = 1e3 * unit_roundoff * std::max(D, 1.0);
        EXPECT_LE(std::abs(quadratic(p, r.minus)), limit) << "D=" << D << " E=" << E;
        EXPECT_LE(std::abs(quadratic(p, r.plus)), limit) << "D=" << D << " E=" << E;
      }
}

TEST(StagnationRoots, BoundDecreasesStrictlyBetweenRoots) {
  Rng rng(23);
  for (int i = 0; i < 300; ++i) {
    const TheoryParams p{rng.uniform(0.2, 2), rng.uniform(0.2, 2), rng.uniform(0.2, 2),
                         std::exp(rng.uniform(std::log(1e-14), std::log(1e-3))),
                         rng.uniform(0.0, 0.3), rng.uniform(0.5, 2)};
    const auto r = stagnation_roots(p);
    for (double t : {0.01, 0.25, 0.5, 0.75, 0.99}) {
      const double x = r.minus + t * (r.plus - r.minus);
      EXPECT_LT(error_bound_step(x, p), x);
    }
  }
}

TEST(StagnationEstimate, Examples) {
  EXPECT_EQ(stagnation_estimate(unit_params(0.01)), 0.01);
  const double est = stagnation_estimate(unit_params(unit_roundoff, 1e-8));
  EXPECT_NEAR(est / unit_roundoff, 1.0000000200000003, 1e-15);
  EXPECT_THROW(stagnation_estimate(unit_params(0.0, 1.0)), EstimateInvalid);
}

TEST(StagnationEstimate, MatchesLowerRootWhenCorrectionIsExact) {
  for (double D : {unit_roundoff, 1e-12, 1e-8, 1e-4, 1e-2}) {
    const TheoryParams p{1.0, 2.0, 1.0, D, 0.0, 1.0};
    const double lm = stagnation_roots(p).minus;
    const double diff = std::abs(stagnation_estimate(p) - lm) / lm;
    EXPECT_LE(diff, 10.0 * p.curvature_term() * D) << "D=" << D;
  }
}

TEST(StagnationEstimate, DiffersFromLowerRootAtFirstOrderInE) {
  // lambda_minus ~ D / (1 - w) while the estimate is D / (1 - w)^2, so their
  // relative gap is w / (1 - w) to leading order, w = EMK(1+D).
  for (double D : {unit_roundoff, 1e-10, 1e-6})
    for (double E : {1e-8, 1e-6, 1e-4, 1e-2, 5e-2}) {
      const TheoryParams p{1.0, 2.0, 1.0, D, E, 1.0};
      const double w = p.correction_term();
      const double lm = stagnation_roots(p).minus;
      const double diff = std::abs(stagnation_estimate(p) - lm) / lm;
      EXPECT_NEAR(diff, w / (1.0 - w), 0.05 * w + 10.0 * p.curvature_term() * D + 4e-15)
          << "D=" << D << " E=" << E;
    }
}

TEST(StagnationEstimate, WorkedGap) {
  // D = 1e-3, E = 0.05, L = 2: lambda_minus = 1.05385728279137e-3 (50 digits).
  const TheoryParams p{1.0, 2.0, 1.0, 1e-3, 0.05, 1.0};
  EXPECT_NEAR(stagnation_roots(p).minus, 1.0538572827913731e-3, 1e-18);
  EXPECT_NEAR(stagnation_estimate(p), 1.1081498852839083e-3, 1e-18);
}

TEST(LinearRate, SqrtConstants) {
  const double rho = linear_rate(1.0 / 24.0, sqrt_params(1e-2), 1e-2);
  EXPECT_NEAR(rho, 0.02 + 0.5 / 24.0, 1e-15);
  EXPECT_GT(rho, 0.035);
  EXPECT_LT(rho, 0.045);
}

TEST(LinearRate, Limits) {
  EXPECT_EQ(linear_rate(0.0, sqrt_params(0.0), 0.0), 0.0);
  const TheoryParams p{0.7, 1.3, 2.0, 0.0, 0.1, 1.0};
  EXPECT_DOUBLE_EQ(linear_rate(0.0, p, 0.05), 0.1 * 0.7 * 2.0 + 0.05);
}

TEST(SuperlinearBound, SqrtConstantsQuadratic) {
  const double r = 1e-3;
  EXPECT_NEAR(superlinear_bound(r, sqrt_params(0.0), 1.0, 1.0, 1.0), 2.5 * r * r, 1e-20);
}

TEST(SuperlinearBound, Limits) {
  EXPECT_EQ(superlinear_bound(0.0, sqrt_params(0.0), 1.0, 1.0, 0.5), 0.0);
  const TheoryParams p{0.7, 1.3, 2.0, 0.0, 0.0, 1.5};
  const double r = 0.01;
  EXPECT_DOUBLE_EQ(superlinear_bound(r, p, 0.0, 0.0, 1.0), 0.5 * p.L * p.K * p.z_norm * r * r);
  EXPECT_THROW(superlinear_bound(r, p, 1.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(superlinear_bound(r, p, 1.0, 1.0, 1.5), DomainError);
}

TEST(SufficientAccuracy, SquareRootOfD) {
  EXPECT_EQ(sufficient_correction_accuracy(unit_params(0.25)), 0.5);
  EXPECT_NEAR(sufficient_correction_accuracy(unit_params(unit_roundoff)), 1.0536712127723509e-08,
              1e-23);
}

TEST(TheoryParams, Validation) {
  EXPECT_NO_THROW(unit_params().validate());
  EXPECT_THROW((TheoryParams{1, 1, 1, 0, 0, 0}).validate(), DomainError);
  EXPECT_THROW((TheoryParams{1, 1, 1, -1e-3, 0, 1}).validate(), DomainError);
  EXPECT_THROW((TheoryParams{1, 1, 1, 0, std::nan(""), 1}).validate(), DomainError);
}
