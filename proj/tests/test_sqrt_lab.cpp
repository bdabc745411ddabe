#include <bit>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "newton_lab/double_double.hpp"
#include "newton_lab/random.hpp"
#include "newton_lab/sqrt_lab.hpp"

using namespace newton_lab;
using namespace newton_lab::sqrt_lab;

namespace {

// One grid run shared by the experiment-level tests.
const std::vector<SqrtCell>& default_cells() {
  static const std::vector<SqrtCell> cells = run_sqrt_experiment(SqrtExperimentConfig{});
  return cells;
}

}  // namespace

TEST(RangeReduce, Examples) {
  auto check = [](double alpha, double m, int e) {
    const auto r = range_reduce(alpha);
    EXPECT_EQ(r.m, m) << alpha;
    EXPECT_EQ(r.e, e) << alpha;
  };
  check(2.0, 2.0, 0);
  check(8.0, 2.0, 1);
  check(0.5, 2.0, -1);
  check(1.0, 1.0, 0);
  check(4.0, 1.0, 1);
  check(0.25, 1.0, -1);
  check(std::numeric_limits<double>::max(), std::ldexp(std::numeric_limits<double>::max(), -1022),
        511);
}

TEST(RangeReduce, RejectsOutOfScopeInputs) {
  EXPECT_THROW(range_reduce(0.0), NonPositive);
  EXPECT_THROW(range_reduce(-1.0), NonPositive);
  EXPECT_THROW(range_reduce(std::numeric_limits<double>::infinity()), NonFinite);
  EXPECT_THROW(range_reduce(std::nan("")), NonFinite);
  EXPECT_THROW(range_reduce(std::numeric_limits<double>::denorm_min()), Subnormal);
  EXPECT_THROW(range_reduce(-std::numeric_limits<double>::infinity()), NonFinite);
}

TEST(RangeReduce, RoundTripIsBitExact) {
  Rng rng(31);
  for (int i = 0; i < 100000; ++i) {
    std::uint64_t bits = rng.bits() & ~(1ULL << 63);
    const std::uint64_t exponent = 1 + rng.bits() % 2046;  // normal numbers only
    bits = (bits & ((1ULL << 52) - 1)) | (exponent << 52);
    const double alpha = std::bit_cast<double>(bits);
    const auto r = range_reduce(alpha);
    ASSERT_GE(r.m, 1.0);
    ASSERT_LT(r.m, 4.0);
    ASSERT_EQ(std::bit_cast<std::uint64_t>(reconstruct(r)), bits);
  }
}

TEST(InitialGuess, Examples) {
  EXPECT_DOUBLE_EQ(initial_guess(1.0), 25.0 / 24.0);
  EXPECT_DOUBLE_EQ(initial_guess(2.0), 1.375);
  EXPECT_DOUBLE_EQ(initial_guess(4.0), 49.0 / 24.0);
  EXPECT_THROW(initial_guess(0.99), OutOfRange);
  EXPECT_THROW(initial_guess(4.01), OutOfRange);
  EXPECT_THROW(initial_guess(std::nan("")), OutOfRange);
}

TEST(InitialGuess, RelativeErrorAtMostOneTwentyFourth) {
  double worst = 0.0, where = 0.0;
  const int n = 300000;
  for (int i = 0; i <= n; ++i) {
    const double m = 1.0 + 3.0 * i / n;
    const double r = std::abs(initial_guess(m) - std::sqrt(m)) / std::sqrt(m);
    if (r > worst) {
      worst = r;
      where = m;
    }
  }
  EXPECT_LE(worst, 1.0 / 24.0 + 1e-10);
  EXPECT_NEAR(worst, 1.0 / 24.0, 1e-6);
  EXPECT_NEAR(where, 1.0, 1e-6);
}

TEST(InitialGuess, AbsoluteErrorEquioscillates) {
  // Best uniform linear fit: error +1/24, -1/24, +1/24 at m = 1, 9/4, 4.
  EXPECT_NEAR(initial_guess(1.0) - 1.0, 1.0 / 24.0, 1e-15);
  EXPECT_NEAR(initial_guess(2.25) - 1.5, -1.0 / 24.0, 1e-15);
  EXPECT_NEAR(initial_guess(4.0) - 2.0, 1.0 / 24.0, 1e-15);
}

TEST(ReferenceSqrt, Examples) {
  EXPECT_EQ(reference_sqrt(4.0), 2.0);
  EXPECT_EQ(reference_sqrt(1.0), 1.0);
  EXPECT_EQ(reference_sqrt(2.0), 1.4142135623730951);
}

TEST(ReferenceSqrt, CorrectlyRoundedAgainstDoubleDoubleOracle) {
  Rng rng(32);
  for (int i = 0; i < 20000; ++i) {
    const double alpha = std::ldexp(rng.uniform(1.0, 2.0), static_cast<int>(rng.uniform(-60, 60)));
    const double s = reference_sqrt(alpha);
    const DoubleDouble exact = heron_sqrt(alpha);
    const double half_ulp = 0.5 * (std::nextafter(s, 2 * s) - s);
    // The platform value must be within half an ulp of the oracle.
    ASSERT_LE(static_cast<double>(abs(DoubleDouble(s) - exact)), half_ulp * (1 + 1e-10)) << alpha;
  }
}

TEST(HeronOracle, SquaresBack) {
  for (double a : {2.0, 3.0, 10.0, 0.1, 1e150, 1e-150}) {
    const DoubleDouble s = heron_sqrt(a);
    const double rel = static_cast<double>(abs(s * s - DoubleDouble(a)) / DoubleDouble(a));
    EXPECT_LE(rel, 1e-30) << a;
  }
}

TEST(Experiment, GridAndOrdering) {
  const SqrtExperimentConfig cfg;
  const auto g = alpha_grid(cfg);
  ASSERT_EQ(g.size(), 256u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_LT(g.back(), 4.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(4.0, 1.0 / 256), 1e-14);
  const auto& cells = default_cells();
  ASSERT_EQ(cells.size(), 3u * 256u);
  EXPECT_EQ(cells[0].epsilon, 1e-2);
  EXPECT_EQ(cells[256].epsilon, 1e-8);
  EXPECT_EQ(cells[257].alpha_index, 1u);
}

TEST(Experiment, ConfigValidation) {
  SqrtExperimentConfig cfg;
  cfg.epsilons = {};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.epsilons = {-1e-2};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.alpha_max = 4.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.alpha_count = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Experiment, StagnationLevelIndependentOfEpsilon) {
  std::size_t hits = 0;
  for (const auto& c : default_cells()) {
    EXPECT_LE(*c.trace.back().relative_error, 10 * unit_roundoff)
        << "alpha=" << c.alpha << " eps=" << c.epsilon;
    hits += c.trace.back().exact_hit();
  }
  EXPECT_GT(hits, 0u);
}

TEST(Experiment, ExactHitFlagMatchesZeroError) {
  for (const auto& c : default_cells())
    for (const auto& r : c.trace.records) {
      EXPECT_EQ(r.exact_hit(), *r.relative_error == 0.0);
      if (r.exact_hit()) {
        EXPECT_EQ(r.iterate[0], reference_sqrt(range_reduce(c.alpha).m));
      }
    }
}

TEST(Experiment, QuadraticConstantBelowThreeHalves) {
  double worst = 0.0;
  for (const auto& c : default_cells()) {
    if (c.epsilon != 1e-8) continue;
    for (std::size_t k = 0; k + 1 < c.trace.size(); ++k) {
      const double r0 = *c.trace[k].relative_error, r1 = *c.trace[k + 1].relative_error;
      if (r0 >= 1e-8 && r1 > pre_stagnation_floor) worst = std::max(worst, r1 / (r0 * r0));
    }
  }
  EXPECT_GT(worst, 0.0);
  EXPECT_LE(worst, 1.5);
}

TEST(Experiment, FurtherEpsilonReductionChangesNothing) {
  const auto& cells = default_cells();
  std::size_t same = 0;
  for (std::size_t i = 0; i < 256; ++i)
    same += iterations_to_stagnation(cells[256 + i].trace) ==
            iterations_to_stagnation(cells[512 + i].trace);
  EXPECT_GE(same, 244u);  // 95%
}

TEST(Experiment, Deterministic) {
  SqrtExperimentConfig cfg;
  cfg.alpha_count = 16;
  const auto a = run_sqrt_experiment(cfg);
  const auto b = run_sqrt_experiment(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].trace.size(), b[i].trace.size());
    for (std::size_t k = 0; k < a[i].trace.size(); ++k)
      EXPECT_EQ(a[i].trace[k].iterate, b[i].trace[k].iterate);
  }
  cfg.seed += 1;
  const auto c = run_sqrt_experiment(cfg);
  EXPECT_NE(a[0].trace[1].iterate, c[0].trace[1].iterate);
}

TEST(Certificate, HoldsOnEveryStep) {
  std::size_t steps = 0;
  for (const auto& c : default_cells())
    for (const auto& a : audit_trace(range_reduce(c.alpha).m, c.trace)) {
      ++steps;
      EXPECT_TRUE(a.holds()) << "alpha=" << c.alpha << " eps=" << c.epsilon << " k=" << a.k;
    }
  EXPECT_GT(steps, 3000u);
}

TEST(Certificate, DetectsConstantsThatAreTooSmall) {
  LocalConstants tight;
  tight.L = 0.2;
  tight.K_times_z = 0.05;
  tight.M_times_K = 0.1;
  std::size_t violations = 0;
  for (const auto& c : default_cells())
    for (const auto& a : audit_trace(range_reduce(c.alpha).m, c.trace, tight)) violations += !a.holds();
  EXPECT_GT(violations, 0u);
}

TEST(Statistics, RatiosAndMeans) {
  EXPECT_DOUBLE_EQ(geometric_mean({1e-2, 1e-4}), 1e-3);
  EXPECT_TRUE(std::isnan(geometric_mean({})));
  const auto t = run_cell(2.0, 1e-2, 9, {});
  for (double r : pre_stagnation_ratios(t)) {
    EXPECT_GT(r, 0.0);
    EXPECT_LT(r, 0.05);
  }
}
