// Command-line driver: sqrt, md, bounds and verify subcommands.
//
// Exit status: 0 success, 1 configuration error, 2 numerical failure,
// 3 acceptance failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "newton_lab/acceptance.hpp"
#include "newton_lab/artifacts.hpp"
#include "newton_lab/config.hpp"
#include "newton_lab/errors.hpp"
#include "newton_lab/md_io.hpp"
#include "newton_lab/random.hpp"

namespace {

using namespace newton_lab;

enum Exit { ok = 0, config_error = 1, numerical_error = 2, acceptance_failure = 3 };

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;

  Config config() const {
    Config c = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& s : overrides) c.set(s);
    return c;
  }

  /// --seed, then NEWTON_LAB_SEED, then the built-in default.
  std::uint64_t resolve_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("NEWTON_LAB_SEED"); env && *env) {
      try {
        return parse_unsigned(env);
      } catch (const ConfigError&) {
        throw ConfigError(std::string("NEWTON_LAB_SEED: not a nonnegative integer: '") + env + "'");
      }
    }
    return default_seed;
  }
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_out) {
  c.out_dir = default_out;
  cmd->add_option("--config", c.config_path, "configuration file (key = value, [section] headers)");
  cmd->add_option("--out", c.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "master seed (default: NEWTON_LAB_SEED, then built-in)");
  cmd->add_option("--set", c.overrides, "override a setting, section.key=value (repeatable)");
}

int cmd_sqrt(const Common& c) {
  const auto cfg = artifacts::sqrt_config(c.config(), c.resolve_seed());
  const auto set = artifacts::sqrt_artifacts(cfg, sqrt_lab::run_sqrt_experiment(cfg));
  set.write(c.out_dir);
  std::cout << set.summary;
  return ok;
}

int cmd_md(const Common& c) {
  const Config conf = c.config();
  const auto m = artifacts::md_config(conf);
  mdsim::MDSystem sys = artifacts::load_system(m.system, c.resolve_seed());
  const auto set = artifacts::md_artifacts(mdsim::run_md(sys, m.n_steps, m.sample_every, m.stop));
  set.write(c.out_dir);
  std::cout << set.summary;
  return ok;
}

int cmd_bounds(const Common& c) {
  const auto set = artifacts::bounds_artifacts(artifacts::bounds_table(c.config()));
  set.write(c.out_dir);
  std::cout << set.summary;
  return ok;
}

int cmd_verify(const Common& c, bool list, bool write) {
  if (list) {
    acceptance::print_list(std::cout);
    return ok;
  }
  const auto thresholds = acceptance::Thresholds::from(c.config());
  const std::uint64_t seed = c.resolve_seed();
  if (write) ensure_writable_directory(c.out_dir);
  const auto report = acceptance::run(seed, thresholds, &std::cout);
  if (write) report.files.write(c.out_dir);
  std::size_t passed = 0;
  for (const auto& r : report.results) passed += r.passed;
  std::cout << passed << "/" << report.results.size() << " criteria passed\n";
  return report.all_passed() ? ok : acceptance_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed Newton iteration experiments"};
  app.require_subcommand(1);

  Common sqrt_opts, md_opts, bounds_opts, verify_opts;
  auto* sqrt_cmd = app.add_subcommand("sqrt", "square-root iteration over an (epsilon, alpha) grid");
  add_common(sqrt_cmd, sqrt_opts, "out/sqrt");
  auto* md_cmd = app.add_subcommand("md", "SHAKE constrained dynamics with traced multiplier solves");
  add_common(md_cmd, md_opts, "out/md");
  auto* bounds_cmd = app.add_subcommand("bounds", "stagnation roots and thresholds over a grid");
  add_common(bounds_cmd, bounds_opts, "out/bounds");
  auto* verify_cmd = app.add_subcommand("verify", "run the acceptance criteria");
  add_common(verify_cmd, verify_opts, "out/verify");
  bool list = false;
  verify_cmd->add_flag("--list", list, "print the criteria without running them");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*sqrt_cmd) return cmd_sqrt(sqrt_opts);
    if (*md_cmd) return cmd_md(md_opts);
    if (*bounds_cmd) return cmd_bounds(bounds_opts);
    return cmd_verify(verify_opts, list, verify_cmd->count("--out") > 0);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  }
}
