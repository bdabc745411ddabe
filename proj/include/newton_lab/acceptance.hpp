#pragma once

// The acceptance suite run by `verify`: ten criteria with pinned tolerances,
// one pass/fail line each.

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "newton_lab/artifacts.hpp"
#include "newton_lab/config.hpp"
#include "newton_lab/errors.hpp"
#include "newton_lab/linalg.hpp"
#include "newton_lab/md_io.hpp"
#include "newton_lab/mdsim.hpp"
#include "newton_lab/random.hpp"
#include "newton_lab/sqrt_lab.hpp"
#include "newton_lab/theory.hpp"

namespace newton_lab::acceptance {

/// Every tolerance the suite checks against. Each field can be overridden
/// with verify.<name> = value.
struct Thresholds {
  double final_error_u = 10.0;          // 1
  double linear_ratio_min = 5e-3;       // 2
  double linear_ratio_max = 4e-2;
  double quadratic_constant = 1.5;      // 3
  double quadratic_min_r = 1e-8;
  double quadratic_max_iterations = 4;
  // 1/24 is attained at m = 1, where x_0 itself carries one rounding.
  double initial_error_max = 1.0 / 24.0 + 2.0 * unit_roundoff;
  double agreement_fraction = 0.95;     // 4
  double certificate_margin = 0.1;      // 5
  double certificate_violations = 0;
  double estimate_factor = 10.0;        // 6
  double root_residual_u = 1e3;
  double bisection_rel = 1e-12;
  double operator_u = 32.0;             // 7
  double operator_pairs = 1e4;
  double violation_u = 100.0;           // 8
  double md_iterations = 10;
  double nu_min = 1e-2;
  double nu_max = 1e2;
  double momentum_u = 1e3;
  double md_min_samples = 20;
  double fd_step = 1e-6;                // 9
  double fd_rel = 1e-6;
  double fd_states = 100;

  std::vector<std::pair<const char*, double*>> fields() {
    return {{"final_error_u", &final_error_u},
            {"linear_ratio_min", &linear_ratio_min},
            {"linear_ratio_max", &linear_ratio_max},
            {"quadratic_constant", &quadratic_constant},
            {"quadratic_min_r", &quadratic_min_r},
            {"quadratic_max_iterations", &quadratic_max_iterations},
            {"initial_error_max", &initial_error_max},
            {"agreement_fraction", &agreement_fraction},
            {"certificate_margin", &certificate_margin},
            {"certificate_violations", &certificate_violations},
            {"estimate_factor", &estimate_factor},
            {"root_residual_u", &root_residual_u},
            {"bisection_rel", &bisection_rel},
            {"operator_u", &operator_u},
            {"operator_pairs", &operator_pairs},
            {"violation_u", &violation_u},
            {"md_iterations", &md_iterations},
            {"nu_min", &nu_min},
            {"nu_max", &nu_max},
            {"momentum_u", &momentum_u},
            {"md_min_samples", &md_min_samples},
            {"fd_step", &fd_step},
            {"fd_rel", &fd_rel},
            {"fd_states", &fd_states}};
  }

  static Thresholds from(const Config& c) {
    Thresholds t;
    std::set<std::string> names;
    for (auto& [name, ptr] : t.fields()) {
      names.insert(name);
      *ptr = c.get_real(std::string("verify.") + name, *ptr);
    }
    c.check_section("verify", names);
    return t;
  }
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CriterionInfo {
  int id;
  const char* name;
  const char* description;
};

inline const std::vector<CriterionInfo>& criteria() {
  static const std::vector<CriterionInfo> list{
      {1, "sqrt stagnation independence",
       "final relative error <= 10u in every (epsilon, alpha) cell"},
      {2, "linear regime", "geometric-mean ratio r_{k+1}/r_k at epsilon=1e-2 in [5e-3, 4e-2]"},
      {3, "quadratic regime",
       "r_{k+1} <= 1.5 r_k^2 for r_k >= 1e-8 at epsilon=1e-8; stagnation within 4 iterations"},
      {4, "sqrt(u) sufficiency",
       "iterations to stagnation equal at epsilon=1e-12 and 1e-8 in >= 95% of cells"},
      {5, "one-step certificate", "every traced sqrt step satisfies the one-step error bound"},
      {6, "stagnation-root consistency",
       "estimate vs lambda_minus, root residuals and a bisection oracle over 100 parameter sets"},
      {7, "error operator properties", "reconstruction and norm identities within 32u on 1e4 pairs"},
      {8, "md surrogate",
       "violation <= 100u, stagnation within 10 iterations, nu_k in [1e-2, 1e2], momentum to 1e3u"},
      {9, "jacobian oracle", "constraint and multiplier Jacobians match central differences"},
      {10, "determinism", "rerun pipelines produce byte-identical CSVs"}};
  return list;
}

inline void print_list(std::ostream& out) {
  for (const auto& c : criteria()) out << c.id << "  " << c.name << ": " << c.description << "\n";
}

namespace detail {

inline std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

inline CriterionResult make(int id, bool passed, std::string detail) {
  return {id, criteria()[static_cast<std::size_t>(id - 1)].name, passed, std::move(detail)};
}

}  // namespace detail

// ---------------------------------------------------------------- sqrt criteria

inline sqrt_lab::SqrtExperimentConfig acceptance_sqrt_config(std::uint64_t seed) {
  sqrt_lab::SqrtExperimentConfig cfg;
  cfg.epsilons = {1e-2, 1e-8, 1e-12};
  cfg.alpha_count = 256;
  cfg.seed = seed;
  return cfg;
}

inline std::size_t epsilon_index(const sqrt_lab::SqrtExperimentConfig& cfg, double eps) {
  for (std::size_t i = 0; i < cfg.epsilons.size(); ++i)
    if (cfg.epsilons[i] == eps) return i;
  throw ConfigError("acceptance: epsilon missing from the grid");
}

inline CriterionResult check_stagnation_independence(const std::vector<sqrt_lab::SqrtCell>& cells,
                                                     const Thresholds& t) {
  double worst = 0.0;
  std::size_t bad = 0;
  for (const auto& c : cells) {
    const double r = c.trace.back().relative_error.value_or(
                         std::numeric_limits<double>::infinity()) / unit_roundoff;
    worst = std::max(worst, r);
    if (!(r <= t.final_error_u)) ++bad;
  }
  return detail::make(1, bad == 0,
                      detail::fmt("max final error %.3gu over %.0f cells (limit %.3gu)", worst,
                                  static_cast<double>(cells.size()), t.final_error_u) +
                          detail::fmt(", %.0f above the limit", static_cast<double>(bad)));
}

inline CriterionResult check_linear_regime(const sqrt_lab::SqrtExperimentConfig& cfg,
                                           const std::vector<sqrt_lab::SqrtCell>& cells,
                                           const Thresholds& t) {
  const std::size_t ei = epsilon_index(cfg, 1e-2);
  std::vector<double> ratios;
  for (const auto& c : cells) {
    if (c.epsilon_index != ei) continue;
    const auto r = sqrt_lab::pre_stagnation_ratios(c.trace);
    ratios.insert(ratios.end(), r.begin(), r.end());
  }
  const double g = sqrt_lab::geometric_mean(ratios);
  const bool ok = g >= t.linear_ratio_min && g <= t.linear_ratio_max;
  return detail::make(2, ok,
                      detail::fmt("geometric mean %.4g over %.0f steps", g,
                                  static_cast<double>(ratios.size())) +
                          detail::fmt(" (window [%.3g, %.3g])", t.linear_ratio_min,
                                      t.linear_ratio_max));
}

inline CriterionResult check_quadratic_regime(const sqrt_lab::SqrtExperimentConfig& cfg,
                                              const std::vector<sqrt_lab::SqrtCell>& cells,
                                              const Thresholds& t) {
  const std::size_t ei = epsilon_index(cfg, 1e-8);
  double worst_c = 0.0, worst_r0 = 0.0;
  std::size_t worst_iters = 0, steps = 0, never = 0;
  for (const auto& c : cells) {
    if (c.epsilon_index != ei) continue;
    const auto& tr = c.trace;
    worst_r0 = std::max(worst_r0, tr[0].relative_error.value_or(0.0));
    if (const auto it = sqrt_lab::iterations_to_stagnation(tr))
      worst_iters = std::max(worst_iters, *it);
    else
      ++never;
    for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
      const double r0 = *tr[k].relative_error;
      const double r1 = *tr[k + 1].relative_error;
      if (r0 < t.quadratic_min_r || !(r1 > sqrt_lab::pre_stagnation_floor)) continue;
      worst_c = std::max(worst_c, r1 / (r0 * r0));
      ++steps;
    }
  }
  const bool ok = worst_c <= t.quadratic_constant && never == 0 &&
                  static_cast<double>(worst_iters) <= t.quadratic_max_iterations &&
                  worst_r0 <= t.initial_error_max;
  return detail::make(3, ok,
                      detail::fmt("max r_{k+1}/r_k^2 %.3g over %.0f steps (limit %.3g)", worst_c,
                                  static_cast<double>(steps), t.quadratic_constant) +
                          detail::fmt(", max iterations %.0f (limit %.0f), max r_0 %.4g",
                                      static_cast<double>(worst_iters) +
                                          (never ? std::numeric_limits<double>::infinity() : 0.0),
                                      t.quadratic_max_iterations, worst_r0));
}

inline CriterionResult check_sqrt_sufficiency(const sqrt_lab::SqrtExperimentConfig& cfg,
                                              const std::vector<sqrt_lab::SqrtCell>& cells,
                                              const Thresholds& t) {
  const std::size_t a = epsilon_index(cfg, 1e-8);
  const std::size_t b = epsilon_index(cfg, 1e-12);
  std::vector<std::optional<std::size_t>> ia(cfg.alpha_count), ib(cfg.alpha_count);
  for (const auto& c : cells) {
    if (c.epsilon_index == a) ia[c.alpha_index] = sqrt_lab::iterations_to_stagnation(c.trace);
    if (c.epsilon_index == b) ib[c.alpha_index] = sqrt_lab::iterations_to_stagnation(c.trace);
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < cfg.alpha_count; ++i)
    if (ia[i] && ib[i] && *ia[i] == *ib[i]) ++same;
  const double frac = static_cast<double>(same) / static_cast<double>(cfg.alpha_count);
  return detail::make(4, frac >= t.agreement_fraction,
                      detail::fmt("%.0f of %.0f cells agree", static_cast<double>(same),
                                  static_cast<double>(cfg.alpha_count)) +
                          detail::fmt(" (%.1f%%, limit %.1f%%)", 100.0 * frac,
                                      100.0 * t.agreement_fraction));
}

inline CriterionResult check_certificate(const std::vector<sqrt_lab::SqrtCell>& cells,
                                         const Thresholds& t) {
  sqrt_lab::LocalConstants lc;
  lc.L = 2.0 + t.certificate_margin;
  lc.K_times_z = 0.5 + t.certificate_margin;
  lc.M_times_K = 1.0 + t.certificate_margin;
  std::size_t steps = 0, violations = 0;
  double worst = 0.0;
  for (const auto& c : cells) {
    const double m = sqrt_lab::range_reduce(c.alpha).m;
    for (const auto& a : sqrt_lab::audit_trace(m, c.trace, lc)) {
      ++steps;
      if (!a.holds()) ++violations;
      if (a.bound > 0.0) worst = std::max(worst, a.r_next / a.bound);
    }
  }
  return detail::make(5, static_cast<double>(violations) <= t.certificate_violations,
                      detail::fmt("%.0f violations over %.0f steps, max r_{k+1}/bound %.3g",
                                  static_cast<double>(violations), static_cast<double>(steps),
                                  worst));
}

// ---------------------------------------------------------------- theory criteria

/// Root of q on [lo, hi] by bisection, assuming a sign change.
inline double bisect_root(const std::function<double(double)>& q, double lo, double hi) {
  double flo = q(lo);
  for (int i = 0; i < 2000; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = q(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline std::vector<theory::TheoryParams> root_grid() {
  const double Ds[] = {unit_roundoff, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 2.4e-2};
  const double Es[] = {0.0, 1e-8, 1e-6, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 6e-2, 9e-2};
  std::vector<theory::TheoryParams> grid;
  for (double D : Ds)
    for (double E : Es) grid.push_back({1.0, 2.0, 1.0, D, E, 1.0});
  return grid;
}

inline CriterionResult check_stagnation_roots(const Thresholds& t) {
  std::size_t fails_estimate = 0, fails_residual = 0, fails_oracle = 0, used = 0;
  double worst_ratio = 0.0;
  double worst_D = 0.0, worst_E = 0.0;
  for (const auto& p : root_grid()) {
    if (p.correction_term() > 0.1 || 2.0 * p.curvature_term() * p.D > 0.1) continue;
    ++used;
    const auto roots = theory::stagnation_roots(p);
    const double a = 0.5 * p.curvature_term();
    const double b = 1.0 - p.correction_term();
    auto q = [&](double r) { return p.D - b * r + a * r * r; };

    const double estimate = theory::stagnation_estimate(p);
    const double emk = p.E * p.M * p.K;
    const double allowed = t.estimate_factor * (p.curvature_term() * p.D + emk * emk);
    const double diff = std::abs(estimate - roots.minus) / roots.minus;
    if (!(diff <= allowed)) ++fails_estimate;
    const double ratio = diff / allowed;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst_D = p.D;
      worst_E = p.E;
    }

    const double res_limit = t.root_residual_u * unit_roundoff * std::max(p.D, 1.0);
    if (!(std::abs(q(roots.minus)) <= res_limit && std::abs(q(roots.plus)) <= res_limit &&
          roots.minus <= roots.plus))
      ++fails_residual;

    const double vertex = b / (2.0 * a);
    const double lm = bisect_root(q, 0.0, vertex);
    const double lp = bisect_root(q, vertex, 2.0 * vertex + 1.0);
    if (!(std::abs(lm - roots.minus) <= t.bisection_rel * lm &&
          std::abs(lp - roots.plus) <= t.bisection_rel * lp))
      ++fails_oracle;
  }
  const bool ok = fails_estimate == 0 && fails_residual == 0 && fails_oracle == 0 && used > 0;
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%zu parameter sets: estimate bound missed in %zu (worst diff/limit %.3g at "
                "D=%.3g E=%.3g), residual failures %zu, bisection mismatches %zu",
                used, fails_estimate, worst_ratio, worst_D, worst_E, fails_residual, fails_oracle);
  return detail::make(6, ok, buf);
}

inline CriterionResult check_error_operator(std::uint64_t seed, const Thresholds& t) {
  Rng rng(substream_seed(seed, 0x4c33));
  const auto pairs = static_cast<std::size_t>(t.operator_pairs);
  std::size_t bad = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 100.0);
    Vector x(std::min<std::size_t>(n, 100));
    for (double& v : x) v = rng.normal();
    const double rho = std::exp(rng.uniform(std::log(1e-12), std::log(0.5)));
    const Vector y = x + (rho * norm2(x)) * rng.unit_direction(x.size());

    const auto e = theory::error_operator(x, y);
    const double yn = unit_roundoff * norm2(y);
    Matrix shifted = e.matrix();
    shifted += Matrix::identity(x.size());
    const double recon = std::max(norm2(e.apply_shifted(x) - y), norm2(shifted * x - y)) / yn;
    // Rank-one 2-norm |y - x| |x| / |x|^2, against the identity |x - y| / |x|.
    const double en = norm2(y - x) * norm2(x) / dot(x, x);
    const double identity = norm2(x - y) / norm2(x);
    const double nerr = std::abs(e.norm2() - identity) / (unit_roundoff * en);
    const double merr = std::abs(en - identity) / (unit_roundoff * en);
    const double w = std::max({recon, nerr, merr});
    worst = std::max(worst, w);
    if (!(w <= t.operator_u)) ++bad;
  }
  return detail::make(7, bad == 0,
                      detail::fmt("%.0f pairs, worst deviation %.3gu (limit %.3gu)",
                                  static_cast<double>(pairs), worst, t.operator_u));
}

// ---------------------------------------------------------------- md criteria

inline constexpr std::size_t md_steps = 1000;
inline constexpr std::size_t md_sample_every = 50;

inline CriterionResult check_md(const mdsim::MdRun& run, const Thresholds& t) {
  double worst_violation = 0.0, worst_momentum = 0.0;
  double nu_lo = std::numeric_limits<double>::infinity(), nu_hi = 0.0;
  std::size_t worst_stag = 0, nu_count = 0, nu_missing = 0;
  for (const auto& d : run.steps) {
    worst_violation = std::max(worst_violation, d.max_violation / unit_roundoff);
    worst_momentum = std::max(worst_momentum, d.momentum_change / unit_roundoff);
  }
  for (const auto& s : run.samples) {
    worst_violation = std::max(worst_violation, s.report.violation / unit_roundoff);
    worst_stag = std::max(worst_stag, s.report.stagnation_iteration);
    for (const auto& e : s.report.ratios) {
      if (!s.report.pre_stagnation(e.k)) continue;
      if (!e.nu) {
        ++nu_missing;
        continue;
      }
      ++nu_count;
      nu_lo = std::min(nu_lo, *e.nu);
      nu_hi = std::max(nu_hi, *e.nu);
    }
  }
  const bool nu_ok = nu_count == 0 || (nu_lo >= t.nu_min && nu_hi <= t.nu_max);
  const bool ok = static_cast<double>(run.samples.size()) >= t.md_min_samples &&
                  worst_violation <= t.violation_u &&
                  static_cast<double>(worst_stag) <= t.md_iterations && nu_ok &&
                  worst_momentum <= t.momentum_u;
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%zu samples: violation %.3gu (limit %.3gu), stagnation at %zu (limit %.0f), "
                "nu in [%.3g, %.3g] over %zu steps (%zu undefined), momentum %.3gu (limit %.3gu)",
                run.samples.size(), worst_violation, t.violation_u, worst_stag, t.md_iterations,
                nu_count ? nu_lo : 0.0, nu_hi, nu_count, nu_missing, worst_momentum, t.momentum_u);
  return detail::make(8, ok, buf);
}

/// A random constrained configuration: a noisy chain with random masses,
/// velocities, forces, multiplier and time step.
struct RandomState {
  mdsim::ConstraintSet constraints;
  mdsim::StepContext ctx;
  Vector lambda;
};

inline RandomState random_state(Rng& rng) {
  RandomState s;
  const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 9.0);
  Vector q = mdsim::helix_positions(n, 1.0);
  for (double& v : q) v += 0.1 * rng.normal();
  std::vector<mdsim::Bond> bonds;
  for (std::size_t i = 0; i + 1 < n; ++i) bonds.push_back({i, i + 1, rng.uniform(0.8, 1.2)});
  s.constraints = mdsim::ConstraintSet(std::move(bonds));
  auto& c = s.ctx;
  c.q = q;
  c.v_half = Vector(3 * n);
  c.force = Vector(3 * n);
  c.inverse_mass = Vector(3 * n);
  for (std::size_t a = 0; a < n; ++a) {
    const double w = 1.0 / rng.uniform(0.5, 2.0);
    for (std::size_t k = 3 * a; k < 3 * a + 3; ++k) {
      c.inverse_mass[k] = w;
      c.v_half[k] = rng.normal();
      c.force[k] = rng.normal();
    }
  }
  c.jacobian = mdsim::constraint_jacobian(q, s.constraints);
  c.h = rng.uniform(0.01, 0.1);
  c.constraints = &s.constraints;
  s.lambda = Vector(n - 1);
  for (double& v : s.lambda) v = rng.normal();
  return s;
}

/// Central differences of f: R^n -> R^m at x, one column per coordinate.
inline Matrix central_difference(const std::function<Vector(const Vector&)>& f, const Vector& x,
                                 double h) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    Vector xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    const Vector d = f(xp) - f(xm);
    for (std::size_t r = 0; r < f0.size(); ++r) j(r, c) = d[r] / (2.0 * h);
  }
  return j;
}

inline CriterionResult check_jacobians(std::uint64_t seed, const Thresholds& t) {
  Rng rng(substream_seed(seed, 0x4a4f));
  const auto states = static_cast<std::size_t>(t.fd_states);
  double worst_g = 0.0, worst_l = 0.0;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < states; ++i) {
    RandomState s = random_state(rng);
    s.ctx.constraints = &s.constraints;
    const auto& cs = s.constraints;
    Matrix jg = mdsim::constraint_jacobian(s.ctx.q, cs);
    const Matrix fg = central_difference(
        [&](const Vector& q) { return mdsim::constraint_values(q, cs); }, s.ctx.q, t.fd_step);
    Matrix dg = jg;
    dg -= fg;
    const double eg = norm_frobenius(dg) / norm_frobenius(jg);

    const solver::Problem p = mdsim::multiplier_problem(s.ctx);
    Matrix jl = p.jacobian(s.lambda);
    const Matrix fl = central_difference(p.residual, s.lambda, t.fd_step);
    Matrix dl = jl;
    dl -= fl;
    const double el = norm_frobenius(dl) / norm_frobenius(jl);

    worst_g = std::max(worst_g, eg);
    worst_l = std::max(worst_l, el);
    if (!(eg <= t.fd_rel && el <= t.fd_rel)) ++bad;
  }
  return detail::make(9, bad == 0,
                      detail::fmt("%.0f states: constraint Jacobian %.3g, multiplier Jacobian %.3g",
                                  static_cast<double>(states), worst_g, worst_l) +
                          detail::fmt(" (limit %.3g)", t.fd_rel));
}

// ---------------------------------------------------------------- pipelines

/// The file set `verify` writes: sqrt traces, MD reports and the bounds table
/// for the default grids.
struct Pipelines {
  sqrt_lab::SqrtExperimentConfig sqrt_cfg;
  std::vector<sqrt_lab::SqrtCell> cells;
  mdsim::MdRun md;
  artifacts::ArtifactSet files;
};

inline Pipelines run_pipelines(std::uint64_t seed) {
  Pipelines p;
  p.sqrt_cfg = acceptance_sqrt_config(seed);
  p.cells = sqrt_lab::run_sqrt_experiment(p.sqrt_cfg);
  mdsim::MDSystem sys = mdsim::bundled_chain(seed);
  p.md = mdsim::run_md(sys, md_steps, md_sample_every);

  const auto sq = artifacts::sqrt_artifacts(p.sqrt_cfg, p.cells);
  const auto md = artifacts::md_artifacts(p.md);
  const auto bd = artifacts::bounds_artifacts(artifacts::bounds_table(Config{}));
  for (const auto* set : {&sq, &md, &bd})
    for (const auto& f : set->files) p.files.add(f.filename, f.content);
  return p;
}

/// File names a generated plot script opens or writes.
inline std::vector<std::string> referenced_files(const std::string& script) {
  static const std::regex name("\"([A-Za-z0-9_.+-]+\\.(csv|png))\"");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(script.begin(), script.end(), name);
       it != std::sregex_iterator(); ++it)
    out.push_back((*it)[1]);
  return out;
}

inline CriterionResult check_determinism(const Pipelines& first, std::uint64_t seed) {
  const Pipelines second = run_pipelines(seed);
  std::size_t csvs = 0, differ = 0, dangling = 0;
  for (const auto& f : first.files.files) {
    const auto* g = second.files.find(f.filename);
    if (f.filename.ends_with(".csv")) {
      ++csvs;
      if (!g || g->content != f.content) ++differ;
    }
    if (f.filename.ends_with(".py"))
      for (const auto& ref : referenced_files(f.content))
        if (ref.ends_with(".csv") && !first.files.find(ref)) ++dangling;
  }
  const bool ok = differ == 0 && dangling == 0 && csvs > 0 &&
                  first.files.files.size() == second.files.files.size();
  return detail::make(10, ok,
                      detail::fmt("%.0f CSVs compared, %.0f differ, %.0f dangling plot inputs",
                                  static_cast<double>(csvs), static_cast<double>(differ),
                                  static_cast<double>(dangling)));
}

struct Report {
  std::vector<CriterionResult> results;
  artifacts::ArtifactSet files;

  bool all_passed() const {
    for (const auto& r : results)
      if (!r.passed) return false;
    return !results.empty();
  }
};

inline void print_result(std::ostream& out, const CriterionResult& r) {
  out << (r.passed ? "PASS " : "FAIL ") << (r.id < 10 ? " " : "") << r.id << "  " << r.name << ": "
      << r.detail << "\n";
}

/// Runs every criterion, printing each line as soon as it is known.
inline Report run(std::uint64_t seed, const Thresholds& t, std::ostream* progress = nullptr) {
  Report rep;
  auto add = [&](CriterionResult r) {
    if (progress) print_result(*progress, r);
    rep.results.push_back(std::move(r));
  };
  // A pipeline failure fails the criteria that depend on it rather than
  // aborting the suite.
  std::optional<Pipelines> p;
  std::string pipeline_error;
  try {
    p = run_pipelines(seed);
  } catch (const Error& e) {
    pipeline_error = e.what();
  }
  auto failed = [&](int id) { return detail::make(id, false, "pipeline failed: " + pipeline_error); };

  if (p) {
    add(check_stagnation_independence(p->cells, t));
    add(check_linear_regime(p->sqrt_cfg, p->cells, t));
    add(check_quadratic_regime(p->sqrt_cfg, p->cells, t));
    add(check_sqrt_sufficiency(p->sqrt_cfg, p->cells, t));
    add(check_certificate(p->cells, t));
  } else {
    for (int id = 1; id <= 5; ++id) add(failed(id));
  }
  add(check_stagnation_roots(t));
  add(check_error_operator(seed, t));
  if (p) add(check_md(p->md, t));
  else add(failed(8));
  add(check_jacobians(seed, t));
  if (p) {
    try {
      add(check_determinism(*p, seed));
    } catch (const Error& e) {
      add(detail::make(10, false, std::string("rerun failed: ") + e.what()));
    }
    rep.files = std::move(p->files);
  } else {
    add(failed(10));
  }
  return rep;
}

}  // namespace newton_lab::acceptance
