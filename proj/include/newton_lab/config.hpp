#pragma once

// Flat key = value configuration with [section] headers. Keys are addressed
// as "section.key"; later assignments (including --set overrides) win.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "newton_lab/errors.hpp"
#include "newton_lab/linalg.hpp"

namespace newton_lab {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string_view strip_comment(std::string_view s) {
  const auto p = s.find('#');
  return p == std::string_view::npos ? s : s.substr(0, p);
}

/// Parses a real number. A trailing "u" multiplies by the unit roundoff, so
/// "u" is 2^-53 and "10u" is ten times that.
inline double parse_real(std::string_view text) {
  std::string_view s = trim(text);
  double factor = 1.0;
  if (!s.empty() && s.back() == 'u') {
    factor = unit_roundoff;
    s.remove_suffix(1);
    if (s.empty()) return factor;
  }
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("not a number: '" + std::string(text) + "'");
  return v * factor;
}

inline std::uint64_t parse_unsigned(std::string_view text) {
  const std::string_view s = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("not a nonnegative integer: '" + std::string(text) + "'");
  return v;
}

inline std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  std::string_view s = text;
  while (true) {
    const auto p = s.find(',');
    const auto item = trim(s.substr(0, p));
    if (item.empty()) throw ConfigError("empty entry in list '" + std::string(text) + "'");
    out.push_back(parse_real(item));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

class Config {
public:
  static Config parse(std::istream& in) {
    Config c;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto s = trim(strip_comment(line));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ParseError("unterminated section header", lineno);
        section = std::string(trim(s.substr(1, s.size() - 2)));
        if (section.empty()) throw ParseError("empty section name", lineno);
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key = value", lineno);
      const auto key = trim(s.substr(0, eq));
      if (key.empty()) throw ParseError("missing key", lineno);
      const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
      c.values_[full] = std::string(trim(s.substr(eq + 1)));
    }
    return c;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
      return parse(in);
    } catch (const ParseError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }

  /// Applies "section.key=value".
  void set(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("override must be key=value: '" + std::string(assignment) + "'");
    const auto key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError("override has an empty key");
    values_[std::string(key)] = std::string(trim(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_real(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_real(it->second);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  std::uint64_t get_unsigned(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_unsigned(it->second);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  std::vector<double> get_real_list(const std::string& key, std::vector<double> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_real_list(it->second);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError(key + ": not a boolean: '" + it->second + "'");
  }

  /// Rejects keys of `section` outside `allowed` (catches typos).
  void check_section(const std::string& section, const std::set<std::string>& allowed) const {
    const std::string prefix = section + ".";
    for (const auto& [k, v] : values_) {
      if (k.rfind(prefix, 0) != 0) continue;
      if (!allowed.count(k.substr(prefix.size())))
        throw ConfigError("unknown configuration key '" + k + "'");
    }
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
  std::map<std::string, std::string> values_;
};

}  // namespace newton_lab
