#pragma once

// Turns experiment results into files: CSV traces, plot scripts and the
// printed summaries. Everything is built in memory first so that a run
// either writes all of its files or none.

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "newton_lab/config.hpp"
#include "newton_lab/csv.hpp"
#include "newton_lab/md_io.hpp"
#include "newton_lab/mdsim.hpp"
#include "newton_lab/solver.hpp"
#include "newton_lab/sqrt_lab.hpp"
#include "newton_lab/theory.hpp"

namespace newton_lab::artifacts {

struct Artifact {
  std::string filename;
  std::string content;
};

struct ArtifactSet {
  std::vector<Artifact> files;
  std::string summary;

  void add(std::string name, std::string content) {
    files.push_back({std::move(name), std::move(content)});
  }

  const Artifact* find(const std::string& name) const {
    for (const auto& f : files)
      if (f.filename == name) return &f;
    return nullptr;
  }

  /// Stages every file as a temporary before renaming any, so a failure
  /// leaves none of the set behind.
  void write(const std::filesystem::path& dir) const {
    ensure_writable_directory(dir);
    std::vector<std::filesystem::path> staged;
    auto discard = [&] {
      std::error_code ec;
      for (const auto& p : staged) std::filesystem::remove(p, ec);
    };
    const std::string suffix = ".staged";
    try {
      for (const auto& f : files) {
        const auto tmp = dir / (f.filename + suffix);
        write_file_atomic(tmp, f.content);
        staged.push_back(tmp);
      }
    } catch (...) {
      discard();
      throw;
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      std::error_code ec;
      std::filesystem::rename(staged[i], dir / files[i].filename, ec);
      if (ec) {
        discard();
        throw ConfigError("cannot move " + staged[i].string() + " into place");
      }
    }
  }
};

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols{"k", "residual_norm", "r_k", "e_norm", "d_norm", "nu_k"};
  return cols;
}

/// One row per iterate: k, residual_norm, r_k, e_norm, d_norm, nu_k.
inline std::vector<std::vector<std::string>> trace_rows(const solver::IterationTrace& t) {
  std::vector<std::optional<double>> nu(t.size());
  for (const auto& e : solver::measure_ratios(t)) nu[e.k] = e.nu;
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : t.records)
    rows.push_back({std::to_string(r.k), format_double(r.residual_norm),
                    format_field(r.relative_error), format_field(r.e_norm),
                    format_field(r.d_norm), format_field(nu[r.k])});
  return rows;
}

inline CsvTable trace_table(const solver::IterationTrace& t) {
  CsvTable table(trace_columns());
  for (auto& row : trace_rows(t)) table.add_row(std::move(row));
  return table;
}

// ---------------------------------------------------------------- sqrt

inline sqrt_lab::SqrtExperimentConfig sqrt_config(const Config& c, std::uint64_t seed) {
  c.check_section("sqrt", {"epsilons", "alpha_count", "alpha_min", "alpha_max", "max_iterations",
                           "stagnation_window"});
  sqrt_lab::SqrtExperimentConfig cfg;
  cfg.epsilons = c.get_real_list("sqrt.epsilons", cfg.epsilons);
  cfg.alpha_count = c.get_unsigned("sqrt.alpha_count", cfg.alpha_count);
  cfg.alpha_min = c.get_real("sqrt.alpha_min", cfg.alpha_min);
  cfg.alpha_max = c.get_real("sqrt.alpha_max", cfg.alpha_max);
  cfg.stop.max_iterations = c.get_unsigned("sqrt.max_iterations", cfg.stop.max_iterations);
  cfg.stop.stagnation_window = c.get_unsigned("sqrt.stagnation_window", cfg.stop.stagnation_window);
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

inline std::string sqrt_trace_filename(std::size_t index, double epsilon) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "sqrt_trace_%zu_eps%.0e.csv", index, epsilon);
  return buf;
}

struct SqrtSummaryRow {
  double epsilon = 0.0;
  double mean_ratio = 0.0;  ///< geometric mean of pre-stagnation r_{k+1}/r_k
  double mean_iterations = 0.0;
  std::size_t max_iterations = 0;
  std::size_t unstagnated = 0;  ///< cells that never reached 10u
  double max_final_error_u = 0.0;
  std::size_t exact_hits = 0;  ///< cells whose final iterate is the platform value
};

inline std::vector<SqrtSummaryRow> summarize_sqrt(const sqrt_lab::SqrtExperimentConfig& cfg,
                                                  const std::vector<sqrt_lab::SqrtCell>& cells) {
  std::vector<SqrtSummaryRow> rows(cfg.epsilons.size());
  std::vector<std::vector<double>> ratios(cfg.epsilons.size());
  std::vector<std::size_t> counted(cfg.epsilons.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].epsilon = cfg.epsilons[i];
  for (const auto& c : cells) {
    auto& row = rows[c.epsilon_index];
    const auto r = sqrt_lab::pre_stagnation_ratios(c.trace);
    ratios[c.epsilon_index].insert(ratios[c.epsilon_index].end(), r.begin(), r.end());
    if (const auto it = sqrt_lab::iterations_to_stagnation(c.trace)) {
      row.mean_iterations += static_cast<double>(*it);
      row.max_iterations = std::max(row.max_iterations, *it);
      ++counted[c.epsilon_index];
    } else {
      ++row.unstagnated;
    }
    const auto& last = c.trace.back();
    row.max_final_error_u = std::max(row.max_final_error_u, *last.relative_error / unit_roundoff);
    if (last.exact_hit()) ++row.exact_hits;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].mean_ratio = sqrt_lab::geometric_mean(ratios[i]);
    if (counted[i]) rows[i].mean_iterations /= static_cast<double>(counted[i]);
  }
  return rows;
}

inline std::string sqrt_plot_script(const std::vector<std::pair<std::string, double>>& panels) {
  std::ostringstream s;
  s << "#!/usr/bin/env python3\n"
       "# Relative error r_k against iteration k, one panel per epsilon.\n"
       "# Exact hits (r_k = 0) cannot be drawn on a log axis and are skipped.\n"
       "import csv\nimport os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\n"
       "import matplotlib.pyplot as plt\n\n"
       "HERE = os.path.dirname(os.path.abspath(__file__))\nPANELS = [\n";
  for (const auto& [name, eps] : panels) {
    char label[32];
    std::snprintf(label, sizeof(label), "%.0e", eps);
    s << "    (\"" << name << "\", \"" << label << "\"),\n";
  }
  s << "]\n\n"
       "fig, axes = plt.subplots(1, len(PANELS), figsize=(5 * len(PANELS), 4), sharey=True,\n"
       "                         squeeze=False)\n"
       "for ax, (name, label) in zip(axes[0], PANELS):\n"
       "    series = {}\n"
       "    with open(os.path.join(HERE, name)) as f:\n"
       "        for row in csv.DictReader(f):\n"
       "            series.setdefault(row[\"alpha\"], []).append((int(row[\"k\"]), row[\"r_k\"]))\n"
       "    for points in series.values():\n"
       "        pts = [(k, float(r)) for k, r in points if r and float(r) > 0.0]\n"
       "        ax.semilogy([p[0] for p in pts], [p[1] for p in pts], color=\"tab:blue\",\n"
       "                    alpha=0.15, linewidth=0.8)\n"
       "    ax.axhline(2.0 ** -53, color=\"k\", linestyle=\"--\", linewidth=0.8)\n"
       "    ax.set_title(\"epsilon = \" + label)\n"
       "    ax.set_xlabel(\"k\")\n"
       "axes[0][0].set_ylabel(\"relative error r_k\")\n"
       "fig.tight_layout()\n"
       "fig.savefig(os.path.join(HERE, \"sqrt_figure.png\"), dpi=150)\n";
  return s.str();
}

inline ArtifactSet sqrt_artifacts(const sqrt_lab::SqrtExperimentConfig& cfg,
                                  const std::vector<sqrt_lab::SqrtCell>& cells) {
  ArtifactSet out;
  std::vector<std::string> header{"alpha", "epsilon"};
  header.insert(header.end(), trace_columns().begin(), trace_columns().end());
  header.push_back("exact_hit");
  std::vector<CsvTable> tables(cfg.epsilons.size(), CsvTable(header));
  for (const auto& c : cells) {
    const auto rows = trace_rows(c.trace);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::vector<std::string> row{format_double(c.alpha), format_double(c.epsilon)};
      row.insert(row.end(), rows[k].begin(), rows[k].end());
      row.push_back(c.trace[k].exact_hit() ? "1" : "0");
      tables[c.epsilon_index].add_row(std::move(row));
    }
  }
  std::vector<std::pair<std::string, double>> panels;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const std::string name = sqrt_trace_filename(i, cfg.epsilons[i]);
    out.add(name, tables[i].str());
    panels.emplace_back(name, cfg.epsilons[i]);
  }
  out.add("sqrt_figure.py", sqrt_plot_script(panels));

  std::ostringstream s;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %-14s %-12s %-10s %-16s %-10s\n", "epsilon",
                "mean_ratio", "mean_iters", "max_iters", "max_final_err/u", "exact_hits");
  s << line;
  for (const auto& r : summarize_sqrt(cfg, cells)) {
    std::snprintf(line, sizeof(line), "%-10.0e %-14.4e %-12.3f %-10zu %-16.3f %-10zu\n", r.epsilon,
                  r.mean_ratio, r.mean_iterations, r.max_iterations, r.max_final_error_u,
                  r.exact_hits);
    s << line;
    if (r.unstagnated) s << "  (" << r.unstagnated << " cells never reached 10u)\n";
  }
  out.summary = s.str();
  return out;
}

// ---------------------------------------------------------------- md

struct MdRunConfig {
  std::string system = "bundled";
  std::size_t n_steps = 1000;
  std::size_t sample_every = 50;
  solver::StopRule stop = mdsim::default_stop_rule();
};

inline MdRunConfig md_config(const Config& c) {
  c.check_section("md", {"system", "n_steps", "sample_every", "max_iterations", "stagnation_window"});
  MdRunConfig m;
  m.system = c.get_string("md.system", m.system);
  m.n_steps = c.get_unsigned("md.n_steps", m.n_steps);
  m.sample_every = c.get_unsigned("md.sample_every", m.sample_every);
  m.stop.max_iterations = c.get_unsigned("md.max_iterations", m.stop.max_iterations);
  m.stop.stagnation_window = c.get_unsigned("md.stagnation_window", m.stop.stagnation_window);
  if (m.sample_every == 0) throw ConfigError("md.sample_every must be positive");
  m.stop.validate();
  return m;
}

/// "bundled" selects the built-in 20-atom chain; anything else is a path.
inline mdsim::MDSystem load_system(const std::string& source, std::uint64_t seed) {
  if (source == "bundled") return mdsim::bundled_chain(seed);
  std::ifstream in(source);
  if (!in) throw ConfigError("cannot open system file " + source);
  try {
    return mdsim::parse_system(in, seed);
  } catch (const ParseError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline std::string md_plot_script(const std::string& column, const std::string& ylabel,
                                  const std::string& image, bool log_axis) {
  std::ostringstream s;
  s << "#!/usr/bin/env python3\n"
       "# "
    << ylabel
    << " against quasi-Newton iteration k, one curve per sampled step.\n"
       "import csv\nimport os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\n"
       "import matplotlib.pyplot as plt\n\n"
       "HERE = os.path.dirname(os.path.abspath(__file__))\n\n"
       "series = {}\n"
       "with open(os.path.join(HERE, \"md_report.csv\")) as f:\n"
       "    for row in csv.DictReader(f):\n"
       "        value = row[\""
    << column
    << "\"]\n"
       "        if value and float(value) > 0.0:\n"
       "            series.setdefault(row[\"step\"], []).append((int(row[\"k\"]), float(value)))\n\n"
       "fig, ax = plt.subplots(figsize=(5, 4))\n"
       "for points in series.values():\n"
       "    ax.plot([p[0] for p in points], [p[1] for p in points], marker=\".\", linewidth=0.8)\n";
  if (log_axis) s << "ax.set_yscale(\"log\")\n";
  s << "ax.set_xlabel(\"k\")\n"
       "ax.set_ylabel(\""
    << ylabel
    << "\")\n"
       "fig.tight_layout()\n"
       "fig.savefig(os.path.join(HERE, \""
    << image << "\"), dpi=150)\n";
  return s.str();
}

inline ArtifactSet md_artifacts(const mdsim::MdRun& run) {
  ArtifactSet out;
  CsvTable report({"step", "k", "r_k", "e_norm", "nu_k", "violation"});
  for (const auto& s : run.samples) {
    const auto& t = s.report.trace;
    std::vector<std::optional<double>> nu(t.size());
    for (const auto& e : s.report.ratios) nu[e.k] = e.nu;
    for (std::size_t k = 0; k < t.size(); ++k)
      report.add_row({std::to_string(s.step), std::to_string(k), format_field(t[k].relative_error),
                      format_field(t[k].e_norm), format_field(nu[k]),
                      k < s.report.iterate_violations.size()
                          ? format_double(s.report.iterate_violations[k])
                          : std::string()});
  }
  CsvTable traj({"step", "kinetic_energy", "max_violation", "px", "py", "pz"});
  for (std::size_t n = 0; n < run.steps.size(); ++n) {
    const auto& d = run.steps[n];
    traj.add_row({std::to_string(n), format_double(d.kinetic_energy), format_double(d.max_violation),
                  format_double(d.momentum[0]), format_double(d.momentum[1]),
                  format_double(d.momentum[2])});
  }
  out.add("md_report.csv", report.str());
  out.add("md_trajectory.csv", traj.str());
  out.add("md_violation.py",
          md_plot_script("violation", "max relative constraint violation", "md_violation.png", true));
  out.add("md_relative_error.py",
          md_plot_script("r_k", "relative error r_k", "md_relative_error.png", true));
  out.add("md_nu.py", md_plot_script("nu_k", "nu_k = r_{k+1} / (r_k |E_k|)", "md_nu.png", true));

  std::ostringstream s;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %-12s %-12s %-14s %-14s\n", "step", "iterations",
                "stagnation", "violation/u", "median_E");
  s << line;
  for (const auto& smp : run.samples) {
    std::vector<double> es;
    for (const auto& r : smp.report.trace.records)
      if (r.e_norm) es.push_back(*r.e_norm);
    std::sort(es.begin(), es.end());
    const double median = es.empty() ? 0.0 : es[es.size() / 2];
    std::snprintf(line, sizeof(line), "%-8zu %-12zu %-12zu %-14.3f %-14.4e\n", smp.step,
                  smp.report.iterations, smp.report.stagnation_iteration,
                  smp.report.violation / unit_roundoff, median);
    s << line;
  }
  out.summary = s.str();
  return out;
}

// ---------------------------------------------------------------- bounds

struct BoundsRow {
  theory::TheoryParams params;
  std::optional<theory::StagnationRoots> roots;
  std::optional<double> estimate;
  double sqrt_threshold = 0.0;
  std::string status = "ok";
};

inline std::vector<BoundsRow> bounds_table(const Config& c) {
  c.check_section("bounds", {"K", "L", "M", "D", "E", "z_norm"});
  const auto Ks = c.get_real_list("bounds.K", {1.0});
  const auto Ls = c.get_real_list("bounds.L", {1.0});
  const auto Ms = c.get_real_list("bounds.M", {1.0});
  const auto Ds = c.get_real_list("bounds.D", {unit_roundoff});
  const auto Es = c.get_real_list("bounds.E", {0.0, 1e-8, 1e-4});
  const auto Zs = c.get_real_list("bounds.z_norm", {1.0});
  std::vector<BoundsRow> rows;
  for (double K : Ks)
    for (double L : Ls)
      for (double M : Ms)
        for (double D : Ds)
          for (double E : Es)
            for (double z : Zs) {
              BoundsRow row;
              row.params = {K, L, M, D, E, z};
              row.params.validate();
              row.sqrt_threshold = theory::sufficient_correction_accuracy(row.params);
              try {
                row.roots = theory::stagnation_roots(row.params);
              } catch (const NoRealRoots&) {
                row.status = "no_real_roots";
              } catch (const DegenerateQuadratic&) {
                row.status = "degenerate";
              }
              try {
                row.estimate = theory::stagnation_estimate(row.params);
              } catch (const EstimateInvalid&) {
                if (row.status == "ok") row.status = "estimate_invalid";
              }
              rows.push_back(row);
            }
  return rows;
}

inline ArtifactSet bounds_artifacts(const std::vector<BoundsRow>& rows) {
  ArtifactSet out;
  CsvTable t({"K", "L", "M", "D", "E", "z_norm", "lambda_minus", "lambda_plus", "estimate",
              "sqrt_threshold", "status"});
  std::ostringstream s;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-10s %-10s %-10s %-10s %-10s %-14s %-14s %-14s %-12s %s\n",
                "K", "L", "M", "D", "E", "z_norm", "lambda_minus", "lambda_plus", "estimate",
                "sqrt_thresh", "status");
  s << line;
  auto opt = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char b[32];
    std::snprintf(b, sizeof(b), "%.6g", *v);
    return std::string(b);
  };
  for (const auto& r : rows) {
    const auto& p = r.params;
    std::optional<double> lm, lp;
    if (r.roots) {
      lm = r.roots->minus;
      lp = r.roots->plus;
    }
    t.add_row({format_double(p.K), format_double(p.L), format_double(p.M), format_double(p.D),
               format_double(p.E), format_double(p.z_norm), format_field(lm), format_field(lp),
               format_field(r.estimate), format_double(r.sqrt_threshold), r.status});
    std::snprintf(line, sizeof(line),
                  "%-10.3g %-10.3g %-10.3g %-10.3g %-10.3g %-10.3g %-14s %-14s %-14s %-12.3e %s\n",
                  p.K, p.L, p.M, p.D, p.E, p.z_norm, opt(lm).c_str(), opt(lp).c_str(),
                  opt(r.estimate).c_str(), r.sqrt_threshold, r.status.c_str());
    s << line;
  }
  out.add("bounds.csv", t.str());
  out.summary = s.str();
  return out;
}

}  // namespace newton_lab::artifacts
