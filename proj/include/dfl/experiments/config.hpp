// Copyright 2026 The dfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flat key=value experiment configuration. Later sources override earlier
// ones: scenario defaults, then --config FILE, then command-line pairs.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dfl/core.hpp"

namespace dfl::experiments {

/// Malformed configuration or arguments (maps to exit code 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Hierarchy or bound violated by computed results (maps to exit code 3).
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scenario { bounds_table, qubit_sweep, n4_sweep, n_scaling, markovian_qubit, gamma_zero, classical_bds, trajectory };

inline const std::map<std::string, Scenario>& scenario_names() {
  static const std::map<std::string, Scenario> names{
      {"bounds", Scenario::bounds_table},         {"qubit-sweep", Scenario::qubit_sweep},
      {"n4-sweep", Scenario::n4_sweep},           {"n-scaling", Scenario::n_scaling},
      {"markovian-qubit", Scenario::markovian_qubit}, {"gamma-zero", Scenario::gamma_zero},
      {"classical-bds", Scenario::classical_bds}, {"trajectory", Scenario::trajectory}};
  return names;
}

inline std::string scenario_name(Scenario s) {
  for (const auto& [k, v] : scenario_names()) {
    if (v == s) return k;
  }
  return "unknown";
}

/// File stem for outputs: the scenario name with '-' replaced by '_'.
inline std::string scenario_stem(Scenario s) {
  std::string n = scenario_name(s);
  for (char& c : n) {
    if (c == '-') c = '_';
  }
  return n;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Ordered key=value store with typed accessors. Every accessor records the
/// key as used so unknown keys can be reported.
class KeyValueConfig {
 public:
  void set(const std::string& key, const std::string& value) { values_[trim(key)] = trim(value); }

  /// Parses "key=value"; throws UsageError otherwise.
  void set_pair(const std::string& pair) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || trim(pair.substr(0, eq)).empty()) {
      throw UsageError("expected key=value, got '" + pair + "'");
    }
    set(pair.substr(0, eq), pair.substr(eq + 1));
  }

  /// One pair per line; '#' starts a comment; blank lines ignored.
  void load_stream(std::istream& in, const std::string& origin) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      try {
        set_pair(line);
      } catch (const UsageError& e) {
        throw UsageError(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    load_stream(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    used_[key] = true;
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) {
      used_[key] = true;
      return fallback;
    }
    return parse_double(key, get_string(key, ""));
  }

  long long get_int(const std::string& key, long long fallback) const {
    if (!has(key)) {
      used_[key] = true;
      return fallback;
    }
    const std::string v = get_string(key, "");
    try {
      std::size_t pos = 0;
      const long long r = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw UsageError("key '" + key + "': expected an integer, got '" + v + "'");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) {
      used_[key] = true;
      return fallback;
    }
    const std::string v = get_string(key, "");
    try {
      std::size_t pos = 0;
      if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
      const unsigned long long r = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw UsageError("key '" + key + "': expected an unsigned 64-bit integer, got '" + v + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) {
      used_[key] = true;
      return fallback;
    }
    const std::string v = get_string(key, "");
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError("key '" + key + "': expected a boolean, got '" + v + "'");
  }

  /// Comma-separated reals.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) {
      used_[key] = true;
      return fallback;
    }
    std::vector<double> out;
    for (const auto& item : split(get_string(key, ""))) out.push_back(parse_double(key, item));
    if (out.empty()) throw UsageError("key '" + key + "': empty list");
    return out;
  }

  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const {
    if (!has(key)) {
      used_[key] = true;
      return fallback;
    }
    auto out = split(get_string(key, ""));
    if (out.empty()) throw UsageError("key '" + key + "': empty list");
    return out;
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(k);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  static double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw UsageError("key '" + key + "': expected a number, got '" + v + "'");
    }
  }

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
};

/// Target level: "max" (m_T = l), "zero" (m_T = 0, or 1/2 for odd N), or a
/// half-integer such as 2, -1, 3/2 or 1.5.
inline HalfInt resolve_m_target(const std::string& spec, int n_atoms) {
  const HalfInt l = HalfInt::from_twice(n_atoms);
  HalfInt m;
  if (spec == "max") {
    m = l;
  } else if (spec == "zero") {
    m = HalfInt::from_twice(n_atoms % 2);
  } else {
    try {
      if (const auto slash = spec.find('/'); slash != std::string::npos) {
        const int num = std::stoi(spec.substr(0, slash));
        const int den = std::stoi(spec.substr(slash + 1));
        if (den == 1) {
          m = HalfInt::from_int(num);
        } else if (den == 2) {
          m = HalfInt::from_twice(num);
        } else {
          throw UsageError("m_target denominator must be 1 or 2");
        }
      } else {
        m = HalfInt::from_double(std::stod(spec));
      }
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception&) {
      throw UsageError("m_target: cannot parse '" + spec + "'");
    }
  }
  if (m > l || m < -l || (l.twice() - m.twice()) % 2 != 0) {
    throw UsageError("m_target " + m.str() + " is not a level of the l=" + l.str() + " multiplet");
  }
  return m;
}

}  // namespace dfl::experiments
