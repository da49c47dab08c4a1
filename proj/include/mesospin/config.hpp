#pragma once

// Experiment configuration: a flat "key = value" text file plus command-line
// overrides. Physics parameters have no defaults; only the propagator
// tolerances and the transcript grid size fall back to documented values.
//
//   experiment = spectra_gr
//   dims = 12            # or 4x5
//   coupling = dipolar   # or nn
//   t = 2pi*Nh
//   out = spectra_gr.csv
//
// Real-valued entries accept products and quotients of numbers and the
// symbols pi, Nh (spins per half), N (2 Nh) and a12 (nearest-neighbour
// coupling), e.g. "2pi*Nh" or "pi/a12". Lists are comma separated or
// written start:step:stop.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mesospin/core.hpp"
#include "mesospin/lattice.hpp"
#include "mesospin/magnification.hpp"
#include "mesospin/propagator.hpp"

namespace mesospin {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Experiment {
  SpectraXY,
  SpectraGR,
  MomentsVsTime,
  DimCompare,
  NnCompare,
  FidelityCurve,
  NegativitySweep,
  MixedFidelity,
  LossEp,
  Extrapolate,
};

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string>> names = {
      {Experiment::SpectraXY, "spectra_xy"},         {Experiment::SpectraGR, "spectra_gr"},
      {Experiment::MomentsVsTime, "moments_vs_time"}, {Experiment::DimCompare, "dim_compare"},
      {Experiment::NnCompare, "nn_compare"},         {Experiment::FidelityCurve, "fidelity_curve"},
      {Experiment::NegativitySweep, "negativity_sweep"}, {Experiment::MixedFidelity, "mixed_fidelity"},
      {Experiment::LossEp, "loss_ep"},               {Experiment::Extrapolate, "extrapolate"},
  };
  return names;
}

inline std::string to_string(Experiment e) {
  for (const auto& [k, v] : experiment_names())
    if (k == e) return v;
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  for (const auto& [k, v] : experiment_names())
    if (v == s) return k;
  std::string all;
  for (const auto& [k, v] : experiment_names()) all += (all.empty() ? "" : "|") + v;
  throw ConfigError("unknown experiment '" + s + "' (expected " + all + ")");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_number(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + s + "' is not a number");
  }
  if (pos != s.size()) throw ConfigError(what + ": trailing characters in '" + s + "'");
  if (!std::isfinite(v)) throw ConfigError(what + ": '" + s + "' is not finite");
  return v;
}

inline long parse_integer(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + s + "' is not an integer");
  }
  if (pos != s.size()) throw ConfigError(what + ": trailing characters in '" + s + "'");
  return v;
}

}  // namespace detail

/// Values the symbols of a real-valued entry resolve to.
struct ExprContext {
  std::optional<double> nh;
  std::optional<double> a12;
};

/// number | symbol | number symbol, joined by '*' or '/'.
inline double evaluate_expression(const std::string& text, const ExprContext& ctx, const std::string& what) {
  const std::string s = detail::trim(text);
  if (s.empty()) throw ConfigError(what + ": empty value");
  double acc = 1.0;
  char op = '*';
  std::size_t i = 0;
  while (i <= s.size()) {
    std::size_t j = s.find_first_of("*/", i);
    if (j == std::string::npos) j = s.size();
    const std::string f = detail::trim(s.substr(i, j - i));
    if (f.empty()) throw ConfigError(what + ": malformed expression '" + s + "'");
    std::size_t k = 0;
    while (k < f.size() && (std::isdigit(static_cast<unsigned char>(f[k])) || f[k] == '.' || f[k] == 'e' ||
                            f[k] == 'E' || ((f[k] == '-' || f[k] == '+') && (k == 0 || f[k - 1] == 'e' || f[k - 1] == 'E'))))
      ++k;
    double v = 1.0;
    std::string sym = f.substr(k);
    if (k > 0) v = detail::parse_number(f.substr(0, k), what);
    if (!sym.empty()) {
      double x = 0.0;
      if (sym == "pi") {
        x = std::numbers::pi;
      } else if (sym == "Nh") {
        if (!ctx.nh) throw ConfigError(what + ": 'Nh' is not defined here");
        x = *ctx.nh;
      } else if (sym == "N") {
        if (!ctx.nh) throw ConfigError(what + ": 'N' is not defined here");
        x = 2.0 * *ctx.nh;
      } else if (sym == "a12") {
        if (!ctx.a12) throw ConfigError(what + ": 'a12' is not defined here");
        x = *ctx.a12;
      } else {
        throw ConfigError(what + ": unknown symbol '" + sym + "' in '" + s + "'");
      }
      v *= x;
    }
    if (op == '*') {
      acc *= v;
    } else {
      if (v == 0.0) throw ConfigError(what + ": division by zero in '" + s + "'");
      acc /= v;
    }
    if (j == s.size()) break;
    op = s[j];
    i = j + 1;
  }
  if (!std::isfinite(acc)) throw ConfigError(what + ": '" + s + "' is not finite");
  return acc;
}

/// "4x5", "4,5" or "20".
inline std::vector<int> parse_dims(const std::string& s) {
  std::string t = s;
  for (auto& c : t)
    if (c == 'x' || c == 'X') c = ',';
  std::vector<int> out;
  for (const auto& f : detail::split(t, ',')) {
    const long v = detail::parse_integer(f, "dims");
    if (v < 1) throw ConfigError("dims: every dimension must be >= 1");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

/// Comma-separated expressions, or start:step:stop with the stop included.
inline std::vector<double> parse_real_list(const std::string& s, const ExprContext& ctx, const std::string& what) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    const auto parts = detail::split(s, ':');
    if (parts.size() != 3) throw ConfigError(what + ": range must be start:step:stop");
    const double a = evaluate_expression(parts[0], ctx, what);
    const double h = evaluate_expression(parts[1], ctx, what);
    const double b = evaluate_expression(parts[2], ctx, what);
    if (!(h > 0.0) || b < a) throw ConfigError(what + ": range needs step > 0 and stop >= start");
    const long count = static_cast<long>(std::floor((b - a) / h + 1e-9)) + 1;
    if (count > 1'000'000) throw ConfigError(what + ": range has too many points");
    for (long i = 0; i < count; ++i) out.push_back(a + static_cast<double>(i) * h);
    return out;
  }
  for (const auto& f : detail::split(s, ',')) out.push_back(evaluate_expression(f, ctx, what));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  if (s.find(':') != std::string::npos) {
    const auto parts = detail::split(s, ':');
    if (parts.size() != 3) throw ConfigError(what + ": range must be start:step:stop");
    const long a = detail::parse_integer(parts[0], what);
    const long h = detail::parse_integer(parts[1], what);
    const long b = detail::parse_integer(parts[2], what);
    if (h <= 0 || b < a) throw ConfigError(what + ": range needs step > 0 and stop >= start");
    for (long v = a; v <= b; v += h) out.push_back(static_cast<int>(v));
    return out;
  }
  for (const auto& f : detail::split(s, ',')) out.push_back(static_cast<int>(detail::parse_integer(f, what)));
  return out;
}

inline bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(what + ": expected true|false, got '" + s + "'");
}

/// Key-value store. Every read marks the key as used so that misspelled or
/// irrelevant keys can be reported instead of silently ignored.
class Config {
 public:
  static Config parse(std::istream& is, const std::string& source = "<config>") {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
      if (c.values_.count(key)) throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      c.values_[key] = value;
    }
    return c;
  }

  static Config from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    return parse(f, path);
  }

  /// "key=value" from the command line; replaces any file value.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) {
    if (key.empty()) throw ConfigError("empty key");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required parameter '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  std::optional<std::string> optional(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return require(key);
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Throws if any key was never read.
  void check_all_used() const {
    std::string extra;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) extra += (extra.empty() ? "" : ", ") + k;
    if (!extra.empty()) throw ConfigError("parameters not used by this experiment: " + extra);
  }

  // typed readers

  Experiment experiment() const { return parse_experiment(require("experiment")); }

  std::vector<int> dims(const std::string& key = "dims") const {
    try {
      return parse_dims(require(key));
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  CouplingMode coupling() const {
    try {
      return parse_coupling_mode(require("coupling"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("coupling: ") + e.what());
    }
  }

  Lattice lattice(const std::string& key = "dims") const {
    const auto d = dims(key);
    const auto mode = coupling();
    try {
      return Lattice(d, mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  double real(const std::string& key, const ExprContext& ctx = {}) const {
    return evaluate_expression(require(key), ctx, key);
  }

  std::vector<double> real_list(const std::string& key, const ExprContext& ctx = {}) const {
    return parse_real_list(require(key), ctx, key);
  }

  std::vector<int> int_list(const std::string& key) const { return parse_int_list(require(key), key); }

  long integer(const std::string& key) const { return detail::parse_integer(require(key), key); }

  long integer_or(const std::string& key, long fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  bool boolean_or(const std::string& key, bool fallback) const {
    return has(key) ? parse_bool(require(key), key) : fallback;
  }

  /// "auto" selects 2 pi / (N (1 - eps)); the key itself is required.
  std::optional<double> theta_slope(const ExprContext& ctx = {}) const {
    const auto& s = require("theta_slope");
    if (s == "auto") return std::nullopt;
    return evaluate_expression(s, ctx, "theta_slope");
  }

  Protocol protocol() const {
    try {
      return parse_protocol(require("protocol"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("protocol: ") + e.what());
    }
  }

  /// Documented tolerances unless overridden.
  PropagatorConfig propagator() const {
    PropagatorConfig p;
    p.krylov_dim = static_cast<int>(integer_or("krylov_dim", p.krylov_dim));
    if (has("krylov_tol")) p.tol = real("krylov_tol");
    p.max_substeps = integer_or("max_substeps", p.max_substeps);
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return p;
  }

  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer_or("seed", 0)); }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace mesospin
