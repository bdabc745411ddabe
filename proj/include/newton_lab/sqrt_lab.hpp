#pragma once

// Perturbed Newton iteration for square roots: x_{k+1} = x_k - (1 + e_k) f/f'
// with f(x) = x^2 - m on the reduced range m in [1, 4).

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "newton_lab/double_double.hpp"
#include "newton_lab/errors.hpp"
#include "newton_lab/linalg.hpp"
#include "newton_lab/random.hpp"
#include "newton_lab/solver.hpp"
#include "newton_lab/theory.hpp"

namespace newton_lab::sqrt_lab {

struct RangeReduction {
  double m = 1.0;  ///< in [1, 4)
  int e = 0;       ///< alpha = m 4^e, sqrt(alpha) = sqrt(m) 2^e
};

/// Splits alpha = m 4^e by editing the binary64 exponent field.
inline RangeReduction range_reduce(double alpha) {
  if (std::isnan(alpha) || std::isinf(alpha)) throw NonFinite("range_reduce: alpha is not finite");
  if (!(alpha > 0.0)) throw NonPositive("range_reduce: alpha must be positive");
  if (!std::isnormal(alpha)) throw Subnormal("range_reduce: subnormal alpha is not supported");

  constexpr std::uint64_t exp_mask = 0x7ffULL << 52;
  const auto bits = std::bit_cast<std::uint64_t>(alpha);
  const int q = static_cast<int>((bits & exp_mask) >> 52) - 1023;  // alpha = f 2^q, f in [1, 2)
  const bool odd = (q % 2) != 0;
  const std::uint64_t biased = odd ? 1024 : 1023;
  const double m = std::bit_cast<double>((bits & ~exp_mask) | (biased << 52));
  return {m, odd ? (q - 1) / 2 : q / 2};
}

inline double reconstruct(const RangeReduction& r) { return std::ldexp(r.m, 2 * r.e); }

/// Best uniform linear approximation of sqrt on [1, 4]; relative error <= 1/24.
inline double initial_guess(double m) {
  if (!(m >= 1.0 && m <= 4.0)) throw OutOfRange("initial_guess: m must lie in [1, 4]");
  return m / 3.0 + 17.0 / 24.0;
}

/// The platform's correctly rounded square root.
inline double reference_sqrt(double alpha) { return std::sqrt(alpha); }

inline solver::Problem make_problem(double m) {
  solver::Problem p;
  p.dimension = 1;
  p.residual = [m](const Vector& x) { return Vector{x[0] * x[0] - m}; };
  p.jacobian = [](const Vector& x) { return Matrix{{2.0 * x[0]}}; };
  p.known_zero = Vector{reference_sqrt(m)};
  return p;
}

struct SqrtExperimentConfig {
  std::vector<double> epsilons{1e-2, 1e-8, 1e-12};
  std::size_t alpha_count = 256;
  double alpha_min = 1.0;
  double alpha_max = 4.0;
  solver::StopRule stop{};
  std::uint64_t seed = default_seed;

  void validate() const {
    if (epsilons.empty()) throw ConfigError("sqrt: epsilon list is empty");
    for (double e : epsilons)
      if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("sqrt: epsilon must be positive");
    if (alpha_count == 0) throw ConfigError("sqrt: alpha_count must be positive");
    if (!(alpha_min >= 1.0 && alpha_min < alpha_max && alpha_max <= 4.0))
      throw ConfigError("sqrt: alpha grid must satisfy 1 <= alpha_min < alpha_max <= 4");
    stop.validate();
  }
};

/// alpha_i = alpha_min (alpha_max / alpha_min)^(i / n), i = 0..n-1; half-open.
inline std::vector<double> alpha_grid(const SqrtExperimentConfig& cfg) {
  std::vector<double> g(cfg.alpha_count);
  const double ratio = cfg.alpha_max / cfg.alpha_min;
  for (std::size_t i = 0; i < cfg.alpha_count; ++i)
    g[i] = cfg.alpha_min *
           std::pow(ratio, static_cast<double>(i) / static_cast<double>(cfg.alpha_count));
  return g;
}

struct SqrtCell {
  std::size_t epsilon_index = 0;
  std::size_t alpha_index = 0;
  double epsilon = 0.0;
  double alpha = 0.0;
  solver::IterationTrace trace;
};

inline solver::IterationTrace run_cell(double alpha, double epsilon, std::uint64_t seed,
                                       const solver::StopRule& stop) {
  const RangeReduction rr = range_reduce(alpha);
  solver::PerturbationModel pert;
  pert.correction = solver::RandomRelative{epsilon, seed};
  return solver::iterate(make_problem(rr.m), Vector{initial_guess(rr.m)}, pert, stop);
}

/// Cells ordered epsilon-major. Each cell draws from its own substream.
inline std::vector<SqrtCell> run_sqrt_experiment(const SqrtExperimentConfig& cfg) {
  cfg.validate();
  const auto alphas = alpha_grid(cfg);
  std::vector<SqrtCell> cells;
  cells.reserve(cfg.epsilons.size() * alphas.size());
  for (std::size_t ei = 0; ei < cfg.epsilons.size(); ++ei)
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
      SqrtCell c;
      c.epsilon_index = ei;
      c.alpha_index = ai;
      c.epsilon = cfg.epsilons[ei];
      c.alpha = alphas[ai];
      c.trace = run_cell(c.alpha, c.epsilon, substream_seed(cfg.seed, ei, ai), cfg.stop);
      cells.push_back(std::move(c));
    }
  return cells;
}

/// Level at or below which an iterate counts as stagnated: 10u.
inline constexpr double stagnation_level = 10.0 * unit_roundoff;
/// Steps ending above this level are free of the rounding floor: 100u.
inline constexpr double pre_stagnation_floor = 100.0 * unit_roundoff;

inline std::optional<std::size_t> iterations_to_stagnation(const solver::IterationTrace& t) {
  return solver::first_at_or_below(t, stagnation_level);
}

/// r_{k+1} / r_k over steps with r_{k+1} above the rounding floor.
inline std::vector<double> pre_stagnation_ratios(const solver::IterationTrace& t,
                                                 double floor = pre_stagnation_floor) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double r0 = t[k].relative_error.value_or(0.0);
    const double r1 = t[k + 1].relative_error.value_or(0.0);
    if (r0 > 0.0 && r1 > floor) out.push_back(r1 / r0);
  }
  return out;
}

inline double geometric_mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += std::log(x);
  return std::exp(s / static_cast<double>(v.size()));
}

/// Local bound constants for f(x) = x^2 - m near its positive zero z:
/// L = 2, K z = 1/2 and M K = 1, each inflated by a margin.
struct LocalConstants {
  double L = 2.1;
  double K_times_z = 0.6;
  double M_times_K = 1.1;
};

/// One step re-measured in double-double against the exact zero and the exact
/// Newton correction of the binary64 iterate.
struct StepAudit {
  std::size_t k = 0;
  double r_k = 0.0;
  double r_next = 0.0;
  double e_norm = 0.0;  ///< |t_k - s_k| / |s_k| with s_k exact
  double bound = 0.0;   ///< one-step bound with D = u and E = e_norm
  bool holds() const { return r_next <= bound; }
};

inline std::vector<StepAudit> audit_trace(double m, const solver::IterationTrace& t,
                                          const LocalConstants& c = {}) {
  const DoubleDouble z = heron_sqrt(m);
  const DoubleDouble mm(m);
  auto rel = [&](double x) { return static_cast<double>(abs(DoubleDouble(x) - z) / z); };
  std::vector<StepAudit> out;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double x = t[k].iterate[0];
    const double applied = t[k].correction[0];
    const DoubleDouble xd(x);
    const DoubleDouble s = (xd * xd - mm) / (DoubleDouble(2.0) * xd);
    double e = 0.0;
    if (s.hi != 0.0)
      e = static_cast<double>(abs(DoubleDouble(applied) - s) / abs(s));
    else if (applied != 0.0)
      e = std::numeric_limits<double>::infinity();

    theory::TheoryParams p;
    p.z_norm = static_cast<double>(z);
    p.K = c.K_times_z / p.z_norm;
    p.M = c.M_times_K / p.K;
    p.L = c.L;
    p.D = unit_roundoff;
    p.E = e;
    StepAudit a;
    a.k = k;
    a.r_k = rel(x);
    a.r_next = rel(t[k + 1].iterate[0]);
    a.e_norm = e;
    a.bound = std::isfinite(e) ? theory::error_bound_step(a.r_k, p)
                               : std::numeric_limits<double>::infinity();
    out.push_back(a);
  }
  return out;
}

}  // namespace newton_lab::sqrt_lab
