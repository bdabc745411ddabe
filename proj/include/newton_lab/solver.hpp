#pragma once

// Quasi-Newton iteration x_{k+1} = (I + D_k)(x_k - t_k) where the applied
// correction t_k = (I + E_k) s_k deviates from the Newton correction s_k in a
// controlled way. Every step is traced.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "newton_lab/errors.hpp"
#include "newton_lab/linalg.hpp"
#include "newton_lab/random.hpp"
#include "newton_lab/theory.hpp"

namespace newton_lab::solver {

struct Problem {
  std::size_t dimension = 0;
  std::function<Vector(const Vector&)> residual;
  std::function<Matrix(const Vector&)> jacobian;
  /// Zero used to measure the relative forward error r_k, when known.
  std::optional<Vector> known_zero;
};

/// t_k = s_k.
struct ExactCorrection {};

/// t_k = (1 + e_k) s_k with |e_k| uniform on [eps/2, eps] and a random sign.
/// For n > 1 the error is isotropic: t_k = s_k + e_k |s_k| w, |w| = 1.
struct RandomRelative {
  double epsilon = 0.0;
  std::uint64_t seed = default_seed;
};

/// t_k produced by a caller-supplied linear solve of an approximate system.
struct CustomSolver {
  std::function<Vector(const Vector& x, const Vector& fx)> solve;
  /// Also compute the Newton correction each step to measure |E_k|.
  bool measure_newton_step = true;
};

/// x_{k+1} = x_k - t_k in the machine's own arithmetic.
struct ExactSubtraction {};

/// Each updated component is multiplied by (1 + delta_i), |delta_i| <= u_sim.
struct SimulatedRoundoff {
  double u_sim = 0.0;
  std::uint64_t seed = default_seed ^ 0x5bd1e995ULL;
};

using CorrectionMode = std::variant<ExactCorrection, RandomRelative, CustomSolver>;
using UpdateMode = std::variant<ExactSubtraction, SimulatedRoundoff>;

struct PerturbationModel {
  CorrectionMode correction = ExactCorrection{};
  UpdateMode update = ExactSubtraction{};

  void validate() const {
    if (const auto* r = std::get_if<RandomRelative>(&correction)) {
      if (!(r->epsilon > 0.0) || !std::isfinite(r->epsilon))
        throw DomainError("random_relative: epsilon must be positive");
    }
    if (const auto* c = std::get_if<CustomSolver>(&correction)) {
      if (!c->solve) throw ConfigError("custom_solver: no solve procedure");
    }
    if (const auto* s = std::get_if<SimulatedRoundoff>(&update)) {
      if (!(s->u_sim >= 0.0) || !std::isfinite(s->u_sim))
        throw DomainError("simulated_roundoff: u_sim must be nonnegative");
    }
  }
};

struct StopRule {
  std::size_t max_iterations = 50;
  double residual_floor = 0.0;
  /// Halt once the best residual has not improved for this many iterations.
  std::size_t stagnation_window = 3;

  void validate() const {
    if (max_iterations < 1) throw DomainError("stop rule: max_iterations must be >= 1");
    if (!(residual_floor >= 0.0)) throw DomainError("stop rule: residual_floor must be >= 0");
    if (stagnation_window < 1) throw DomainError("stop rule: stagnation_window must be >= 1");
  }
};

enum class StopReason { ResidualFloor, Stagnated, IterationCap };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::ResidualFloor: return "residual_floor";
    case StopReason::Stagnated: return "stagnated";
    case StopReason::IterationCap: return "iteration_cap";
  }
  return "unknown";
}

struct IterationRecord {
  std::size_t k = 0;
  Vector iterate;
  double residual_norm = 0.0;
  std::optional<double> relative_error;  ///< r_k, when the zero is known
  /// Quantities of the step leaving x_k; absent on the final record.
  std::optional<double> e_norm;  ///< |E_k|_2 = |s_k - t_k| / |s_k|
  std::optional<double> d_norm;  ///< |D_k|, when simulated
  Vector correction;             ///< applied t_k

  bool exact_hit() const { return relative_error && *relative_error == 0.0; }
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  StopReason reason = StopReason::IterationCap;
  std::size_t best_index = 0;  ///< iterate with the smallest residual

  std::size_t size() const noexcept { return records.size(); }
  const IterationRecord& operator[](std::size_t k) const { return records[k]; }
  const IterationRecord& back() const { return records.back(); }
  /// Number of corrections applied.
  std::size_t steps() const noexcept { return records.empty() ? 0 : records.size() - 1; }
};

/// Newton correction s with F'(x) s = F(x).
inline Vector newton_step(const Problem& p, const Vector& x, const Vector& fx) {
  Matrix j = p.jacobian(x);
  if (j.rows() != p.dimension || j.cols() != p.dimension)
    throw ConfigError("newton_step: jacobian is not conformal");
  for (double v : j.data())
    if (!std::isfinite(v)) throw DomainEscape("newton_step: jacobian is not finite");
  try {
    return lu_solve(j, fx);
  } catch (const SingularMatrix& e) {
    throw SingularJacobian(std::string("newton_step: ") + e.what());
  }
}

inline Vector newton_step(const Problem& p, const Vector& x) {
  return newton_step(p, x, p.residual(x));
}

namespace detail {

inline Vector perturb_correction(const Vector& s, const RandomRelative& mode, Rng& rng) {
  double e = rng.uniform(0.5 * mode.epsilon, mode.epsilon);
  if (rng.coin()) e = -e;
  if (s.size() == 1) return Vector{std::fma(e, s[0], s[0])};
  const Vector w = rng.unit_direction(s.size());
  return s + (e * norm2(s)) * w;
}

inline std::optional<double> correction_error(const Vector& s, const Vector& t) {
  if (norm2(s) == 0.0) return std::nullopt;
  return theory::error_operator(s, t).norm2();
}

}  // namespace detail

inline IterationTrace iterate(const Problem& p, Vector x, const PerturbationModel& pert,
                              const StopRule& stop) {
  pert.validate();
  stop.validate();
  if (x.size() != p.dimension) throw ConfigError("iterate: x0 has the wrong dimension");
  if (p.known_zero && p.known_zero->size() != p.dimension)
    throw ConfigError("iterate: known zero has the wrong dimension");

  std::optional<Rng> correction_rng;
  if (const auto* r = std::get_if<RandomRelative>(&pert.correction)) correction_rng.emplace(r->seed);
  std::optional<Rng> update_rng;
  if (const auto* s = std::get_if<SimulatedRoundoff>(&pert.update)) update_rng.emplace(s->seed);

  const double z_norm = p.known_zero ? norm2(*p.known_zero) : 0.0;

  IterationTrace trace;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t k = 0;; ++k) {
    const Vector fx = p.residual(x);
    if (fx.size() != p.dimension) throw ConfigError("iterate: residual is not conformal");
    if (!fx.all_finite()) throw DomainEscape("iterate: residual is not finite at step " +
                                             std::to_string(k));
    IterationRecord rec;
    rec.k = k;
    rec.iterate = x;
    rec.residual_norm = norm2(fx);
    if (p.known_zero) {
      const double dz = norm2(*p.known_zero - x);
      rec.relative_error = z_norm > 0.0 ? dz / z_norm : dz;
    }
    trace.records.push_back(std::move(rec));

    const double res = trace.records.back().residual_norm;
    if (res <= stop.residual_floor) {
      trace.best_index = k;
      trace.reason = StopReason::ResidualFloor;
      break;
    }
    if (res < best) {
      best = res;
      trace.best_index = k;
      stale = 0;
    } else if (++stale >= stop.stagnation_window) {
      trace.reason = StopReason::Stagnated;
      break;
    }
    if (k == stop.max_iterations) {
      trace.reason = StopReason::IterationCap;
      break;
    }

    Vector t;
    std::optional<double> e_norm;
    std::visit(
        [&](const auto& mode) {
          using Mode = std::decay_t<decltype(mode)>;
          if constexpr (std::is_same_v<Mode, ExactCorrection>) {
            t = newton_step(p, x, fx);
            e_norm = 0.0;
          } else if constexpr (std::is_same_v<Mode, RandomRelative>) {
            const Vector s = newton_step(p, x, fx);
            t = detail::perturb_correction(s, mode, *correction_rng);
            e_norm = detail::correction_error(s, t);
          } else {
            t = mode.solve(x, fx);
            if (t.size() != p.dimension)
              throw ConfigError("iterate: custom correction is not conformal");
            if (mode.measure_newton_step && p.jacobian)
              e_norm = detail::correction_error(newton_step(p, x, fx), t);
          }
        },
        pert.correction);

    Vector next = x - t;
    std::optional<double> d_norm;
    if (const auto* s = std::get_if<SimulatedRoundoff>(&pert.update)) {
      double dmax = 0.0;
      for (double& v : next) {
        const double delta = update_rng->uniform(-s->u_sim, s->u_sim);
        v *= 1.0 + delta;
        dmax = std::max(dmax, std::abs(delta));
      }
      d_norm = dmax;
    }
    if (!next.all_finite())
      throw DomainEscape("iterate: iterate is not finite after step " + std::to_string(k));

    auto& cur = trace.records.back();
    cur.correction = std::move(t);
    cur.e_norm = e_norm;
    cur.d_norm = d_norm;
    x = std::move(next);
  }
  return trace;
}

struct RatioEntry {
  std::size_t k = 0;
  /// r_{k+1} / (r_k |E_k|); empty (flagged) when the denominator vanishes.
  std::optional<double> nu;
};

inline std::vector<RatioEntry> measure_ratios(const IterationTrace& t) {
  std::vector<RatioEntry> out;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const auto& cur = t[k];
    const auto& nxt = t[k + 1];
    if (!cur.relative_error || !nxt.relative_error || !cur.e_norm) continue;
    const double denom = *cur.relative_error * *cur.e_norm;
    RatioEntry e{k, std::nullopt};
    if (denom > 0.0) e.nu = *nxt.relative_error / denom;
    out.push_back(e);
  }
  return out;
}

/// First k with r_k <= level (exact hits included), if any.
inline std::optional<std::size_t> first_at_or_below(const IterationTrace& t, double level) {
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k].relative_error && *t[k].relative_error <= level) return k;
  return std::nullopt;
}

/// First k whose residual is within `factor` of the smallest residual seen.
inline std::size_t residual_stagnation_index(const IterationTrace& t, double factor = 10.0) {
  const double best = t[t.best_index].residual_norm;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k].residual_norm <= factor * best) return k;
  return t.best_index;
}

}  // namespace newton_lab::solver
