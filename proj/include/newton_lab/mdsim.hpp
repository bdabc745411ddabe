#pragma once

// SHAKE time stepping for bond-constrained molecular dynamics on staggered
// grids. The multiplier equation g(phi(lambda)) = 0 of every step is solved
// by a quasi-Newton method whose matrix is the fixed symmetric S = G M^-1 G^T,
// optionally instrumented against full Newton on the exact Jacobian.
//
// Constraints are g_i(q) = |q_a - q_b|^2 - d_i^2. Coordinates are stored
// atom-major: q[3 a + c].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "newton_lab/errors.hpp"
#include "newton_lab/linalg.hpp"
#include "newton_lab/random.hpp"
#include "newton_lab/solver.hpp"

namespace newton_lab::mdsim {

struct Bond {
  std::size_t a = 0;
  std::size_t b = 0;
  double length = 1.0;
};

class ConstraintSet {
public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::vector<Bond> bonds) : bonds_(std::move(bonds)) {}

  std::size_t size() const noexcept { return bonds_.size(); }
  bool empty() const noexcept { return bonds_.empty(); }
  const Bond& operator[](std::size_t i) const { return bonds_[i]; }
  const std::vector<Bond>& bonds() const noexcept { return bonds_; }

  bool contains(std::size_t a, std::size_t b) const {
    return std::any_of(bonds_.begin(), bonds_.end(), [&](const Bond& x) {
      return (x.a == a && x.b == b) || (x.a == b && x.b == a);
    });
  }

  void validate(std::size_t n_atoms) const {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const Bond& c : bonds_) {
      if (c.a >= n_atoms || c.b >= n_atoms)
        throw ConfigError("constraint references atom " + std::to_string(std::max(c.a, c.b)) +
                          " of " + std::to_string(n_atoms));
      if (c.a == c.b) throw ConfigError("constraint joins atom " + std::to_string(c.a) + " to itself");
      if (!(c.length > 0.0) || !std::isfinite(c.length))
        throw ConfigError("constraint length must be positive");
      if (!seen.insert(std::minmax(c.a, c.b)).second)
        throw ConfigError("duplicate constraint " + std::to_string(c.a) + "-" + std::to_string(c.b));
    }
  }

private:
  std::vector<Bond> bonds_;
};

inline std::array<double, 3> separation(const Vector& q, std::size_t a, std::size_t b) {
  return {q[3 * a] - q[3 * b], q[3 * a + 1] - q[3 * b + 1], q[3 * a + 2] - q[3 * b + 2]};
}

/// g_i(q) = |q_a - q_b|^2 - d_i^2.
inline Vector constraint_values(const Vector& q, const ConstraintSet& cs) {
  Vector g(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto d = separation(q, cs[i].a, cs[i].b);
    g[i] = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - cs[i].length * cs[i].length;
  }
  return g;
}

/// m x 3N; row i is 2(q_a - q_b) in block a and -2(q_a - q_b) in block b.
inline Matrix constraint_jacobian(const Vector& q, const ConstraintSet& cs) {
  Matrix j(cs.size(), q.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto d = separation(q, cs[i].a, cs[i].b);
    for (std::size_t c = 0; c < 3; ++c) {
      j(i, 3 * cs[i].a + c) = 2.0 * d[c];
      j(i, 3 * cs[i].b + c) = -2.0 * d[c];
    }
  }
  return j;
}

/// max_i | |q_a - q_b| - d_i | / d_i, zero for an empty set.
inline double max_relative_violation(const Vector& q, const ConstraintSet& cs) {
  double worst = 0.0;
  for (const Bond& c : cs.bonds()) {
    const auto d = separation(q, c.a, c.b);
    const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    worst = std::max(worst, std::abs(len - c.length) / c.length);
  }
  return worst;
}

using ForceField = std::function<Vector(const Vector& q)>;

struct LennardJones {
  double epsilon = 1.0;
  double sigma = 1.0;
  double cutoff = 2.5;
  /// Skip pairs joined by a constraint.
  bool exclude_bonded = true;
};

/// Pairwise Lennard-Jones forces, truncated at the cutoff.
inline ForceField lennard_jones_force(const LennardJones& lj, const ConstraintSet& cs,
                                      std::size_t n_atoms) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n_atoms; ++i)
    for (std::size_t j = i + 1; j < n_atoms; ++j)
      if (!lj.exclude_bonded || !cs.contains(i, j)) pairs.emplace_back(i, j);
  const double rc2 = lj.cutoff * lj.cutoff;
  const double s2 = lj.sigma * lj.sigma;
  return [pairs = std::move(pairs), lj, rc2, s2](const Vector& q) {
    Vector f(q.size());
    for (auto [i, j] : pairs) {
      const auto d = separation(q, i, j);
      const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
      if (r2 >= rc2) continue;
      const double sr2 = s2 / r2;
      const double sr6 = sr2 * sr2 * sr2;
      const double scale = 24.0 * lj.epsilon * sr6 * (2.0 * sr6 - 1.0) / r2;
      for (std::size_t c = 0; c < 3; ++c) {
        f[3 * i + c] += scale * d[c];
        f[3 * j + c] -= scale * d[c];
      }
    }
    return f;
  };
}

inline ForceField zero_force() {
  return [](const Vector& q) { return Vector(q.size()); };
}

struct MDSystem {
  std::size_t n_atoms = 0;
  Vector positions;   ///< q_n
  Vector velocities;  ///< v_{n-1/2}
  std::vector<double> masses;
  ForceField force = zero_force();
  ConstraintSet constraints;
  double time_step = 0.0;

  /// Throws ConfigError on inconsistent shapes, nonpositive masses, bad
  /// constraints, or coincident bonded atoms.
  void validate() const {
    if (positions.size() != 3 * n_atoms || velocities.size() != 3 * n_atoms)
      throw ConfigError("md system: coordinate vectors must have 3 entries per atom");
    if (masses.size() != n_atoms) throw ConfigError("md system: one mass per atom required");
    for (double m : masses)
      if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("md system: masses must be positive");
    if (!(time_step > 0.0) || !std::isfinite(time_step))
      throw ConfigError("md system: time step must be positive");
    if (!positions.all_finite() || !velocities.all_finite())
      throw ConfigError("md system: non-finite coordinates");
    if (!force) throw ConfigError("md system: no force field");
    constraints.validate(n_atoms);
    for (const Bond& c : constraints.bonds()) {
      const auto d = separation(positions, c.a, c.b);
      if (d[0] == 0.0 && d[1] == 0.0 && d[2] == 0.0)
        throw ConfigError("md system: bonded atoms " + std::to_string(c.a) + " and " +
                          std::to_string(c.b) + " coincide");
    }
  }

  Vector inverse_mass_diagonal() const {
    Vector w(3 * n_atoms);
    for (std::size_t a = 0; a < n_atoms; ++a)
      for (std::size_t c = 0; c < 3; ++c) w[3 * a + c] = 1.0 / masses[a];
    return w;
  }
};

/// S = G M^-1 G^T with G = g'(q).
inline Matrix assemble_S(const Vector& q, const ConstraintSet& cs, const std::vector<double>& masses) {
  const Matrix g = constraint_jacobian(q, cs);
  Matrix s(cs.size(), cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = 0; j < cs.size(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < q.size(); ++k) sum += g(i, k) * g(j, k) / masses[k / 3];
      s(i, j) = sum;
    }
  return s;
}

/// Everything about step n that is fixed while the multiplier is sought.
struct StepContext {
  Vector q;              ///< q_n
  Vector v_half;         ///< v_{n-1/2}
  Vector force;          ///< f(q_n)
  Vector inverse_mass;   ///< diagonal of M^-1, per coordinate
  Matrix jacobian;       ///< G = g'(q_n)
  double h = 0.0;
  const ConstraintSet* constraints = nullptr;

  static StepContext from(const MDSystem& sys) {
    StepContext c;
    c.q = sys.positions;
    c.v_half = sys.velocities;
    c.force = sys.force(sys.positions);
    c.inverse_mass = sys.inverse_mass_diagonal();
    c.jacobian = constraint_jacobian(sys.positions, sys.constraints);
    c.h = sys.time_step;
    c.constraints = &sys.constraints;
    return c;
  }

  std::size_t multipliers() const { return constraints->size(); }

  /// G^T lambda.
  Vector constraint_force(const Vector& lambda) const {
    Vector out(q.size());
    for (std::size_t i = 0; i < jacobian.rows(); ++i) {
      const auto row = jacobian.row(i);
      for (std::size_t k = 0; k < row.size(); ++k) out[k] += row[k] * lambda[i];
    }
    return out;
  }

  /// v_{n+1/2}(lambda) = v_{n-1/2} + h M^-1 (f - G^T lambda).
  Vector half_step_velocity(const Vector& lambda) const {
    const Vector c = constraint_force(lambda);
    Vector v(q.size());
    for (std::size_t k = 0; k < q.size(); ++k)
      v[k] = v_half[k] + h * (inverse_mass[k] * (force[k] - c[k]));
    return v;
  }
};

/// phi(lambda) = q_n + h (v_{n-1/2} + h M^-1 (f(q_n) - g'(q_n)^T lambda)).
inline Vector trial_positions(const StepContext& ctx, const Vector& lambda) {
  const Vector v = ctx.half_step_velocity(lambda);
  Vector phi(ctx.q.size());
  for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = ctx.q[k] + ctx.h * v[k];
  return phi;
}

/// A(lambda) = g'(phi(lambda)) M^-1 g'(q_n)^T. The derivative of
/// lambda -> g(phi(lambda)) is -h^2 A(lambda).
inline Matrix assemble_A(const StepContext& ctx, const Vector& lambda) {
  const Matrix gp = constraint_jacobian(trial_positions(ctx, lambda), *ctx.constraints);
  const std::size_t m = ctx.multipliers();
  Matrix a(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < ctx.q.size(); ++k)
        sum += gp(i, k) * ctx.inverse_mass[k] * ctx.jacobian(j, k);
      a(i, j) = sum;
    }
  return a;
}

/// lambda -> g(phi(lambda)) with its exact Jacobian.
inline solver::Problem multiplier_problem(const StepContext& ctx) {
  solver::Problem p;
  p.dimension = ctx.multipliers();
  p.residual = [&ctx](const Vector& lambda) {
    return constraint_values(trial_positions(ctx, lambda), *ctx.constraints);
  };
  p.jacobian = [&ctx](const Vector& lambda) {
    Matrix a = assemble_A(ctx, lambda);
    a *= -ctx.h * ctx.h;
    return a;
  };
  return p;
}

enum class SolveMode { QuasiNewtonS, NewtonA };

struct ConstraintSolveReport {
  Vector lambda;
  /// Trace of the requested method; carries r_k and |E_k| when instrumented.
  solver::IterationTrace trace;
  std::vector<solver::RatioEntry> ratios;
  std::optional<Vector> reference;  ///< Newton solution used as the zero
  std::size_t iterations = 0;       ///< corrections applied
  std::size_t stagnation_iteration = 0;
  double violation = 0.0;  ///< max relative violation at phi(lambda)
  /// Max relative violation at phi(x_k) for every traced iterate, when instrumented.
  std::vector<double> iterate_violations;

  /// Whether the step leaving x_k lands before the residual stagnates.
  bool pre_stagnation(std::size_t k) const { return k + 1 < stagnation_iteration; }
};

inline constexpr std::size_t default_max_iterations = 50;

inline solver::StopRule default_stop_rule() {
  solver::StopRule s;
  s.max_iterations = default_max_iterations;
  s.stagnation_window = 3;
  return s;
}

inline ConstraintSolveReport solve_constraints(const StepContext& ctx, SolveMode mode,
                                               const solver::StopRule& stop = default_stop_rule(),
                                               bool instrument = false, long step = -1) {
  solver::Problem problem = multiplier_problem(ctx);
  const Vector x0(ctx.multipliers());
  auto check = [&](const solver::IterationTrace& t, const char* what) {
    if (t.reason == solver::StopReason::IterationCap)
      throw NoConvergence(std::string(what) + " did not stagnate within " +
                              std::to_string(stop.max_iterations) + " iterations",
                          step);
  };

  ConstraintSolveReport report;
  if (instrument || mode == SolveMode::NewtonA) {
    solver::IterationTrace ref =
        solver::iterate(problem, x0, solver::PerturbationModel{}, stop);
    check(ref, "newton constraint solve");
    report.reference = ref[ref.best_index].iterate;
    if (mode == SolveMode::NewtonA) {
      if (instrument) {
        problem.known_zero = report.reference;
        ref = solver::iterate(problem, x0, solver::PerturbationModel{}, stop);
      }
      report.trace = std::move(ref);
    }
  }

  if (mode == SolveMode::QuasiNewtonS) {
    if (instrument) problem.known_zero = report.reference;
    const Matrix s = assemble_S(ctx.q, *ctx.constraints, [&] {
      std::vector<double> m(ctx.q.size() / 3);
      for (std::size_t a = 0; a < m.size(); ++a) m[a] = 1.0 / ctx.inverse_mass[3 * a];
      return m;
    }());
    const auto chol = std::make_shared<CholeskyFactorization>(s);
    const double scale = -1.0 / (ctx.h * ctx.h);
    solver::PerturbationModel pert;
    pert.correction = solver::CustomSolver{
        [chol, scale](const Vector&, const Vector& fx) { return scale * chol->solve(fx); },
        instrument};
    report.trace = solver::iterate(problem, x0, pert, stop);
    check(report.trace, "quasi-newton constraint solve");
  }

  const auto& t = report.trace;
  report.lambda = t[t.best_index].iterate;
  report.iterations = t.steps();
  report.stagnation_iteration = solver::residual_stagnation_index(t);
  if (instrument) {
    report.ratios = solver::measure_ratios(t);
    for (const auto& rec : t.records)
      report.iterate_violations.push_back(
          max_relative_violation(trial_positions(ctx, rec.iterate), *ctx.constraints));
  }
  report.violation = max_relative_violation(trial_positions(ctx, report.lambda), *ctx.constraints);
  return report;
}

struct StepDiagnostics {
  double kinetic_energy = 0.0;  ///< from v_{n+1/2}
  double max_violation = 0.0;   ///< at q_{n+1}
  std::array<double, 3> momentum{};
  /// |P_{n+1/2} - P_{n-1/2}| over the momentum and impulse magnitudes involved.
  double momentum_change = 0.0;
};

inline std::array<double, 3> total_momentum(const MDSystem& sys) {
  std::array<double, 3> p{};
  for (std::size_t a = 0; a < sys.n_atoms; ++a)
    for (std::size_t c = 0; c < 3; ++c) p[c] += sys.masses[a] * sys.velocities[3 * a + c];
  return p;
}

inline double kinetic_energy(const MDSystem& sys) {
  double ke = 0.0;
  for (std::size_t a = 0; a < sys.n_atoms; ++a)
    for (std::size_t c = 0; c < 3; ++c)
      ke += 0.5 * sys.masses[a] * sys.velocities[3 * a + c] * sys.velocities[3 * a + c];
  return ke;
}

struct StepResult {
  ConstraintSolveReport report;
  StepDiagnostics diagnostics;
};

/// One SHAKE step: solve for lambda_n, then
///   v_{n+1/2} = v_{n-1/2} + h M^-1 (f(q_n) - G^T lambda_n),  q_{n+1} = q_n + h v_{n+1/2}.
inline StepResult shake_step(MDSystem& sys, const solver::StopRule& stop = default_stop_rule(),
                             bool instrument = false, long step = -1) {
  const StepContext ctx = StepContext::from(sys);
  StepResult out;
  if (sys.constraints.empty()) {
    out.report.lambda = Vector();
  } else {
    out.report = solve_constraints(ctx, SolveMode::QuasiNewtonS, stop, instrument, step);
  }

  const auto before = total_momentum(sys);
  const Vector c = ctx.constraint_force(out.report.lambda);
  double scale = 0.0;
  for (std::size_t a = 0; a < sys.n_atoms; ++a) {
    double v2 = 0.0, f2 = 0.0;
    for (std::size_t k = 3 * a; k < 3 * a + 3; ++k) {
      v2 += sys.velocities[k] * sys.velocities[k];
      f2 += (ctx.force[k] - c[k]) * (ctx.force[k] - c[k]);
    }
    scale += sys.masses[a] * std::sqrt(v2) + ctx.h * std::sqrt(f2);
  }

  sys.velocities = ctx.half_step_velocity(out.report.lambda);
  for (std::size_t k = 0; k < sys.positions.size(); ++k)
    sys.positions[k] = ctx.q[k] + ctx.h * sys.velocities[k];

  auto& d = out.diagnostics;
  d.momentum = total_momentum(sys);
  const double dp = std::hypot(d.momentum[0] - before[0], d.momentum[1] - before[1],
                               d.momentum[2] - before[2]);
  d.momentum_change = scale > 0.0 ? dp / scale : dp;
  d.kinetic_energy = kinetic_energy(sys);
  d.max_violation = max_relative_violation(sys.positions, sys.constraints);
  return out;
}

struct SampledReport {
  std::size_t step = 0;
  ConstraintSolveReport report;
};

struct MdRun {
  std::vector<SampledReport> samples;
  std::vector<StepDiagnostics> steps;
};

/// Advances n_steps SHAKE steps; after every sample_every-th step the
/// constraint solve of that step is instrumented and kept.
inline MdRun run_md(MDSystem& sys, std::size_t n_steps, std::size_t sample_every,
                    const solver::StopRule& stop = default_stop_rule()) {
  sys.validate();
  if (sample_every == 0) throw ConfigError("run_md: sample_every must be positive");
  MdRun run;
  run.steps.reserve(n_steps);
  for (std::size_t n = 0; n < n_steps; ++n) {
    const bool sample = (n + 1) % sample_every == 0;
    StepResult r = shake_step(sys, stop, sample, static_cast<long>(n));
    if (sample) run.samples.push_back({n, std::move(r.report)});
    run.steps.push_back(r.diagnostics);
  }
  return run;
}

struct ChainSpec {
  std::size_t n_atoms = 20;
  double mass = 1.0;
  double bond_length = 1.0;
  double time_step = 0.002;
  double temperature = 1.0;
  std::uint64_t velocity_seed = default_seed;
  LennardJones lj{};
};

/// Positions of a helix with equal consecutive distances, centred at the origin.
inline Vector helix_positions(std::size_t n, double bond_length) {
  const double turn = 100.0 * std::numbers::pi / 180.0;
  const double rise = 0.3 * bond_length;
  const double chord = std::sqrt(bond_length * bond_length - rise * rise);
  const double radius = chord / (2.0 * std::sin(0.5 * turn));
  Vector q(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    q[3 * i] = radius * std::cos(turn * static_cast<double>(i));
    q[3 * i + 1] = radius * std::sin(turn * static_cast<double>(i));
    q[3 * i + 2] = rise * (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1));
  }
  return q;
}

/// Removes the centre-of-mass velocity and the velocity components along the
/// bonds, so that G v = 0 initially.
inline void constrain_velocities(MDSystem& sys) {
  double total = 0.0;
  std::array<double, 3> p{};
  for (std::size_t a = 0; a < sys.n_atoms; ++a) {
    total += sys.masses[a];
    for (std::size_t c = 0; c < 3; ++c) p[c] += sys.masses[a] * sys.velocities[3 * a + c];
  }
  for (std::size_t a = 0; a < sys.n_atoms; ++a)
    for (std::size_t c = 0; c < 3; ++c) sys.velocities[3 * a + c] -= p[c] / total;
  if (sys.constraints.empty()) return;

  const Matrix g = constraint_jacobian(sys.positions, sys.constraints);
  const Matrix s = assemble_S(sys.positions, sys.constraints, sys.masses);
  const Vector mu = cholesky_solve(s, g * sys.velocities);
  const Vector w = sys.inverse_mass_diagonal();
  const Vector gt_mu = g.transpose() * mu;
  for (std::size_t k = 0; k < sys.velocities.size(); ++k) sys.velocities[k] -= w[k] * gt_mu[k];
}

/// Thermal velocities with standard deviation sqrt(T / m) per component.
inline void thermalize(MDSystem& sys, double temperature, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t a = 0; a < sys.n_atoms; ++a)
    for (std::size_t c = 0; c < 3; ++c)
      sys.velocities[3 * a + c] = std::sqrt(temperature / sys.masses[a]) * rng.normal();
  constrain_velocities(sys);
}

inline ConstraintSet chain_bonds(std::size_t n_atoms, double bond_length) {
  std::vector<Bond> b;
  for (std::size_t i = 0; i + 1 < n_atoms; ++i) b.push_back({i, i + 1, bond_length});
  return ConstraintSet(std::move(b));
}

/// Linear Lennard-Jones chain in reduced units: helix start, thermal velocities.
inline MDSystem make_chain(const ChainSpec& spec) {
  MDSystem sys;
  sys.n_atoms = spec.n_atoms;
  sys.positions = helix_positions(spec.n_atoms, spec.bond_length);
  sys.velocities = Vector(3 * spec.n_atoms);
  sys.masses.assign(spec.n_atoms, spec.mass);
  sys.constraints = chain_bonds(spec.n_atoms, spec.bond_length);
  sys.force = lennard_jones_force(spec.lj, sys.constraints, spec.n_atoms);
  sys.time_step = spec.time_step;
  sys.validate();
  thermalize(sys, spec.temperature, spec.velocity_seed);
  return sys;
}

}  // namespace newton_lab::mdsim
