#pragma once

// Plain-text system definitions for the SHAKE experiment.
//
//   # comment
//   n_atoms = 20
//   time_step = 0.005
//   ...                       (key = value settings)
//   [constraints]
//   0 1 1.0                   (atom_a atom_b length, one bond per line)
//   [atoms]                   (optional)
//   0 1.0 x y z [vx vy vz]    (index mass position [velocity])
//
// Without an [atoms] table the chain is placed on a helix. Velocities not
// given explicitly are drawn thermally at `temperature`.

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "newton_lab/config.hpp"
#include "newton_lab/errors.hpp"
#include "newton_lab/mdsim.hpp"
#include "newton_lab/random.hpp"

namespace newton_lab::mdsim {

inline constexpr std::string_view bundled_chain20 = R"(# Linear chain of 20 unit-mass atoms joined by 19 rigid bonds.
# Non-bonded pairs interact through a truncated Lennard-Jones potential.
# Reduced units: sigma = epsilon = mass = 1.
n_atoms = 20
mass = 1.0
time_step = 0.005
temperature = 1.0
geometry = helix
bond_length = 1.0
force_field = lennard_jones
lj_epsilon = 1.0
lj_sigma = 1.0
lj_cutoff = 2.5
lj_exclude_bonded = true

[constraints]
# atom_a atom_b length
0 1 1.0
1 2 1.0
2 3 1.0
3 4 1.0
4 5 1.0
5 6 1.0
6 7 1.0
7 8 1.0
8 9 1.0
9 10 1.0
10 11 1.0
11 12 1.0
12 13 1.0
13 14 1.0
14 15 1.0
15 16 1.0
16 17 1.0
17 18 1.0
18 19 1.0
)";

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

template <class F>
auto at_line(std::size_t line, F&& f) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace detail

/// Parses a system definition. `seed` drives thermal velocities unless the
/// file sets velocity_seed.
inline MDSystem parse_system(std::istream& in, std::uint64_t seed = default_seed) {
  static const std::set<std::string> known{
      "n_atoms",     "mass",      "time_step", "temperature", "velocity_seed",
      "geometry",    "bond_length", "force_field", "lj_epsilon", "lj_sigma",
      "lj_cutoff",   "lj_exclude_bonded"};

  std::map<std::string, std::pair<std::string, std::size_t>> keys;
  std::vector<Bond> bonds;
  struct AtomRow {
    double mass;
    double x[3];
    bool has_v;
    double v[3];
  };
  std::vector<AtomRow> atoms;
  std::string section;
  std::string line;
  std::size_t lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("unterminated section header", lineno);
      section = std::string(trim(s.substr(1, s.size() - 2)));
      if (section != "constraints" && section != "atoms")
        throw ParseError("unknown section [" + section + "]", lineno);
      continue;
    }
    if (section.empty()) {
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key = value", lineno);
      std::string key(trim(s.substr(0, eq)));
      if (!known.count(key)) throw ParseError("unknown key '" + key + "'", lineno);
      keys[key] = {std::string(trim(s.substr(eq + 1))), lineno};
      continue;
    }
    const auto f = detail::split_ws(s);
    if (section == "constraints") {
      if (f.size() != 3)
        throw ParseError("constraint row needs 3 fields (atom_a atom_b length), found " +
                             std::to_string(f.size()),
                         lineno);
      detail::at_line(lineno, [&] {
        bonds.push_back({parse_unsigned(f[0]), parse_unsigned(f[1]), parse_real(f[2])});
        if (!(bonds.back().length > 0.0)) throw ConfigError("constraint length must be positive");
        return 0;
      });
    } else {
      if (f.size() != 5 && f.size() != 8)
        throw ParseError("atom row needs 5 or 8 fields (index mass x y z [vx vy vz])", lineno);
      detail::at_line(lineno, [&] {
        if (parse_unsigned(f[0]) != atoms.size())
          throw ConfigError("atom rows must be numbered consecutively from 0");
        AtomRow a{};
        a.mass = parse_real(f[1]);
        for (int c = 0; c < 3; ++c) a.x[c] = parse_real(f[2 + c]);
        a.has_v = f.size() == 8;
        if (a.has_v)
          for (int c = 0; c < 3; ++c) a.v[c] = parse_real(f[5 + c]);
        atoms.push_back(a);
        return 0;
      });
    }
  }

  auto real = [&](const std::string& k, double fallback) {
    const auto it = keys.find(k);
    if (it == keys.end()) return fallback;
    return detail::at_line(it->second.second, [&] { return parse_real(it->second.first); });
  };
  auto text = [&](const std::string& k, const std::string& fallback) {
    const auto it = keys.find(k);
    return it == keys.end() ? fallback : it->second.first;
  };
  auto line_of = [&](const std::string& k) {
    const auto it = keys.find(k);
    return it == keys.end() ? std::size_t{0} : it->second.second;
  };

  if (!keys.count("n_atoms")) throw ParseError("missing required key n_atoms", lineno);
  if (!keys.count("time_step")) throw ParseError("missing required key time_step", lineno);
  const std::size_t n = detail::at_line(line_of("n_atoms"), [&] {
    return static_cast<std::size_t>(parse_unsigned(keys["n_atoms"].first));
  });
  if (n == 0) throw ParseError("n_atoms must be positive", line_of("n_atoms"));

  MDSystem sys;
  sys.n_atoms = n;
  sys.time_step = real("time_step", 0.0);
  sys.constraints = ConstraintSet(std::move(bonds));
  const double temperature = real("temperature", 0.0);
  const std::uint64_t vseed =
      keys.count("velocity_seed")
          ? detail::at_line(line_of("velocity_seed"),
                            [&] { return parse_unsigned(keys["velocity_seed"].first); })
          : substream_seed(seed, 0x6d64);

  bool have_velocities = false;
  if (atoms.empty()) {
    const std::string geometry = text("geometry", "helix");
    if (geometry != "helix")
      throw ParseError("unknown geometry '" + geometry + "'", line_of("geometry"));
    sys.positions = helix_positions(n, real("bond_length", 1.0));
    sys.velocities = Vector(3 * n);
    sys.masses.assign(n, real("mass", 1.0));
  } else {
    if (atoms.size() != n)
      throw ParseError("[atoms] lists " + std::to_string(atoms.size()) + " atoms, n_atoms is " +
                           std::to_string(n),
                       lineno);
    sys.positions = Vector(3 * n);
    sys.velocities = Vector(3 * n);
    have_velocities = true;
    for (std::size_t a = 0; a < n; ++a) {
      sys.masses.push_back(atoms[a].mass);
      have_velocities = have_velocities && atoms[a].has_v;
      for (int c = 0; c < 3; ++c) {
        sys.positions[3 * a + c] = atoms[a].x[c];
        sys.velocities[3 * a + c] = atoms[a].has_v ? atoms[a].v[c] : 0.0;
      }
    }
  }

  const std::string ff = text("force_field", "lennard_jones");
  if (ff == "lennard_jones") {
    LennardJones lj;
    lj.epsilon = real("lj_epsilon", lj.epsilon);
    lj.sigma = real("lj_sigma", lj.sigma);
    lj.cutoff = real("lj_cutoff", lj.cutoff);
    const std::string ex = text("lj_exclude_bonded", "true");
    if (ex != "true" && ex != "false")
      throw ParseError("lj_exclude_bonded must be true or false", line_of("lj_exclude_bonded"));
    lj.exclude_bonded = ex == "true";
    sys.force = lennard_jones_force(lj, sys.constraints, n);
  } else if (ff == "none") {
    sys.force = zero_force();
  } else {
    throw ParseError("unknown force_field '" + ff + "'", line_of("force_field"));
  }

  try {
    sys.validate();
  } catch (const ParseError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), lineno);
  }
  if (!have_velocities && temperature > 0.0) thermalize(sys, temperature, vseed);
  return sys;
}

inline MDSystem parse_system_string(std::string_view text, std::uint64_t seed = default_seed) {
  std::istringstream in{std::string(text)};
  return parse_system(in, seed);
}

inline MDSystem bundled_chain(std::uint64_t seed = default_seed) {
  return parse_system_string(bundled_chain20, seed);
}

}  // namespace newton_lab::mdsim
