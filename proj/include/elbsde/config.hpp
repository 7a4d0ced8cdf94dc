#pragma once

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "elbsde/bsde.hpp"
#include "elbsde/oracle.hpp"

namespace elbsde {

/// Everything a CLI run needs. The base state and training region live in `train`.
struct RunConfig {
  ModelParams model;
  TrainConfig train;
  GmmbParams gmmb;
  std::string out_dir = "out";
  std::string checkpoint = "out/model.ckpt";
  long bel_sims = 200000;
  long gmmb_sims = 200000;
  // surface
  std::string grid_feature1 = "x0";
  std::string grid_feature2 = "y0";
  int grid_points = 11;
  // sensitivity
  double bump = 0.1;
  std::vector<double> alpha_sweep{0.0, 0.05, 0.1, 0.15};

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

inline const std::vector<std::string>& state_feature_names() {
  static const std::vector<std::string> names{"x0", "y0", "F0", "v0", "lambda0", "J0"};
  return names;
}

/// Range of a named initial-state feature within the training region.
inline Interval region_range(const InitRegion& r, const std::string& feature) {
  if (feature == "x0") return r.x;
  if (feature == "y0") return r.y;
  if (feature == "F0") return r.f;
  if (feature == "v0") return r.v;
  if (feature == "lambda0") return r.lam;
  if (feature == "J0") return {static_cast<double>(r.k_lo), static_cast<double>(r.k_hi)};
  throw InvariantViolation("grid_feature", "unknown feature '" + feature + "'");
}

inline void set_state_feature(State& s, const std::string& feature, double v) {
  if (feature == "x0") s.x = v;
  else if (feature == "y0") s.y = v;
  else if (feature == "F0") s.f = v;
  else if (feature == "v0") s.v = v;
  else if (feature == "lambda0") s.lam = v;
  else if (feature == "J0") s.k = static_cast<int>(std::lround(v));
  else throw InvariantViolation("grid_feature", "unknown feature '" + feature + "'");
}

inline void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (std::abs(train.grid.horizon() - model.T) > 1e-12) throw InvariantViolation("dt", "must divide T");
  gmmb.validate();
  if (bel_sims < 2) throw InvariantViolation("bel_sims", "must be >= 2");
  if (gmmb_sims < 2) throw InvariantViolation("gmmb_sims", "must be >= 2");
  region_range(train.region, grid_feature1);
  region_range(train.region, grid_feature2);
  if (grid_feature1 == grid_feature2) throw InvariantViolation("grid_feature2", "must differ from grid_feature1");
  if (grid_points < 2) throw InvariantViolation("grid_points", "must be >= 2");
  if (!(bump > 0.0)) throw InvariantViolation("bump", "must be positive");
  for (double a : alpha_sweep)
    if (!(a >= 0.0)) throw InvariantViolation("alpha_sweep", "entries must be non-negative");
  if (out_dir.empty()) throw InvariantViolation("out_dir", "must not be empty");
  if (checkpoint.empty()) throw InvariantViolation("checkpoint", "must not be empty");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") + 1 - b);
}

inline std::vector<double> parse_numbers(const std::string& v, std::size_t line) {
  std::string s = v;
  for (char& ch : s)
    if (ch == ',') ch = ' ';
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    const double d = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ParseError(line, "not a number: '" + tok + "'");
    out.push_back(d);
  }
  return out;
}

// One binding per scalar key: how to read it and how to print it.
struct KeyBinding {
  std::function<void(RunConfig&, const std::string&, std::size_t)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline double parse_double(const std::string& v, std::size_t line) {
  const auto xs = parse_numbers(v, line);
  if (xs.size() != 1) throw ParseError(line, "expected one number");
  return xs[0];
}

inline long parse_long(const std::string& v, std::size_t line) {
  const double d = parse_double(v, line);
  if (d != std::floor(d) || std::abs(d) > 9e15) throw ParseError(line, "expected an integer");
  return static_cast<long>(d);
}

inline Interval parse_interval(const std::string& v, std::size_t line) {
  const auto xs = parse_numbers(v, line);
  if (xs.size() != 2) throw ParseError(line, "expected 'lo hi'");
  return {xs[0], xs[1]};
}

inline const std::map<std::string, KeyBinding>& key_bindings() {
  static const std::map<std::string, KeyBinding> table = [] {
    std::map<std::string, KeyBinding> t;
    auto num = [&](const std::string& key, std::function<double&(RunConfig&)> ref) {
      // the getter only reads through the reference
      t[key] = {[ref](RunConfig& c, const std::string& v, std::size_t line) { ref(c) = parse_double(v, line); },
                [ref](const RunConfig& c) { return nn::format_double(ref(const_cast<RunConfig&>(c))); }};
    };
    auto integer = [&](const std::string& key, std::function<long(const RunConfig&)> get,
                       std::function<void(RunConfig&, long)> set) {
      t[key] = {[set](RunConfig& c, const std::string& v, std::size_t line) { set(c, parse_long(v, line)); },
                [get](const RunConfig& c) { return std::to_string(get(c)); }};
    };
    auto text = [&](const std::string& key, std::string RunConfig::*m) {
      t[key] = {[m](RunConfig& c, const std::string& v, std::size_t) { c.*m = v; },
                [m](const RunConfig& c) { return c.*m; }};
    };

    // model
    num("a", [](RunConfig& c) -> double& { return c.model.a; });
    num("b", [](RunConfig& c) -> double& { return c.model.b; });
    num("sigma_x", [](RunConfig& c) -> double& { return c.model.sigma_x; });
    num("sigma_y", [](RunConfig& c) -> double& { return c.model.sigma_y; });
    num("delta_x", [](RunConfig& c) -> double& { return c.model.delta_x; });
    num("delta_y", [](RunConfig& c) -> double& { return c.model.delta_y; });
    num("psi", [](RunConfig& c) -> double& { return c.model.psi_const; });
    num("kappa", [](RunConfig& c) -> double& { return c.model.kappa; });
    num("eta", [](RunConfig& c) -> double& { return c.model.eta; });
    num("sigma_v", [](RunConfig& c) -> double& { return c.model.sigma_v; });
    num("gamma", [](RunConfig& c) -> double& { return c.model.gamma; });
    num("q", [](RunConfig& c) -> double& { return c.model.q; });
    num("sigma_lambda", [](RunConfig& c) -> double& { return c.model.sigma_lambda; });
    num("u", [](RunConfig& c) -> double& { return c.model.u; });
    num("c", [](RunConfig& c) -> double& { return c.model.c; });
    num("d_star", [](RunConfig& c) -> double& { return c.model.d_star; });
    num("s_star", [](RunConfig& c) -> double& { return c.model.s_star; });
    num("alpha", [](RunConfig& c) -> double& { return c.model.alpha; });
    num("T", [](RunConfig& c) -> double& { return c.model.T; });
    num("T_star", [](RunConfig& c) -> double& { return c.model.T_star; });
    // correlations among the four market factors (mortality is independent)
    const char* names[] = {"x", "y", "f", "v"};
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        const std::string key = std::string("rho_") + names[i] + names[j];
        t[key] = {[i, j](RunConfig& c, const std::string& v, std::size_t line) {
                    c.model.corr(i, j) = c.model.corr(j, i) = parse_double(v, line);
                  },
                  [i, j](const RunConfig& c) { return nn::format_double(c.model.corr(i, j)); }};
      }

    // base state
    num("x0", [](RunConfig& c) -> double& { return c.train.base.x; });
    num("y0", [](RunConfig& c) -> double& { return c.train.base.y; });
    num("F0", [](RunConfig& c) -> double& { return c.train.base.f; });
    num("v0", [](RunConfig& c) -> double& { return c.train.base.v; });
    num("lambda0", [](RunConfig& c) -> double& { return c.train.base.lam; });
    integer("J0", [](const RunConfig& c) { return long{c.train.base.k}; },
            [](RunConfig& c, long v) { c.train.base.k = static_cast<int>(v); });

    // training
    num("dt", [](RunConfig& c) -> double& { return c.train.grid.dt; });
    num("learning_rate", [](RunConfig& c) -> double& { return c.train.learning_rate; });
    integer("epochs", [](const RunConfig& c) { return long{c.train.epochs}; },
            [](RunConfig& c, long v) { c.train.epochs = static_cast<int>(v); });
    integer("batch_size", [](const RunConfig& c) { return long{c.train.batch_size}; },
            [](RunConfig& c, long v) { c.train.batch_size = static_cast<int>(v); });
    integer("pool_size", [](const RunConfig& c) { return long{c.train.pool_size}; },
            [](RunConfig& c, long v) { c.train.pool_size = static_cast<int>(v); });
    integer("seed", [](const RunConfig& c) { return static_cast<long>(c.train.seed); },
            [](RunConfig& c, long v) { c.train.seed = static_cast<std::uint64_t>(v); });
    integer("fresh_paths", [](const RunConfig& c) { return long{c.train.fresh_paths}; },
            [](RunConfig& c, long v) { c.train.fresh_paths = v != 0; });

    // region overrides
    auto range = [&](const std::string& key, Interval InitRegion::*m) {
      t[key] = {[m](RunConfig& c, const std::string& v, std::size_t line) { c.train.region.*m = parse_interval(v, line); },
                [m](const RunConfig& c) {
                  const Interval& iv = c.train.region.*m;
                  return nn::format_double(iv.lo) + " " + nn::format_double(iv.hi);
                }};
    };
    range("region_x", &InitRegion::x);
    range("region_y", &InitRegion::y);
    range("region_F", &InitRegion::f);
    range("region_v", &InitRegion::v);
    range("region_lambda", &InitRegion::lam);
    t["region_J"] = {[](RunConfig& c, const std::string& v, std::size_t line) {
                       const Interval iv = parse_interval(v, line);
                       if (iv.lo != std::floor(iv.lo) || iv.hi != std::floor(iv.hi))
                         throw ParseError(line, "expected integer bounds");
                       c.train.region.k_lo = static_cast<int>(iv.lo);
                       c.train.region.k_hi = static_cast<int>(iv.hi);
                     },
                     [](const RunConfig& c) {
                       return std::to_string(c.train.region.k_lo) + " " + std::to_string(c.train.region.k_hi);
                     }};

    // oracles
    integer("bel_sims", [](const RunConfig& c) { return c.bel_sims; }, [](RunConfig& c, long v) { c.bel_sims = v; });
    integer("gmmb_sims", [](const RunConfig& c) { return c.gmmb_sims; }, [](RunConfig& c, long v) { c.gmmb_sims = v; });
    num("gmmb_r", [](RunConfig& c) -> double& { return c.gmmb.r; });
    num("gmmb_sigma_f", [](RunConfig& c) -> double& { return c.gmmb.sigma_f; });
    num("gmmb_lambda", [](RunConfig& c) -> double& { return c.gmmb.lam_const; });
    num("gmmb_s_star", [](RunConfig& c) -> double& { return c.gmmb.s_star; });
    num("gmmb_F0", [](RunConfig& c) -> double& { return c.gmmb.F0; });
    num("gmmb_T", [](RunConfig& c) -> double& { return c.gmmb.T; });
    num("gmmb_alpha", [](RunConfig& c) -> double& { return c.gmmb.alpha; });
    integer("gmmb_n", [](const RunConfig& c) { return long{c.gmmb.n}; },
            [](RunConfig& c, long v) { c.gmmb.n = static_cast<int>(v); });

    // outputs and command options
    text("out_dir", &RunConfig::out_dir);
    text("checkpoint", &RunConfig::checkpoint);
    text("grid_feature1", &RunConfig::grid_feature1);
    text("grid_feature2", &RunConfig::grid_feature2);
    integer("grid_points", [](const RunConfig& c) { return long{c.grid_points}; },
            [](RunConfig& c, long v) { c.grid_points = static_cast<int>(v); });
    num("bump", [](RunConfig& c) -> double& { return c.bump; });
    t["alpha_sweep"] = {[](RunConfig& c, const std::string& v, std::size_t line) { c.alpha_sweep = parse_numbers(v, line); },
                        [](const RunConfig& c) {
                          std::string s;
                          for (double a : c.alpha_sweep) s += (s.empty() ? "" : " ") + nn::format_double(a);
                          return s;
                        }};
    return t;
  }();
  return table;
}

}  // namespace detail

/// Flat `key = value` text, one key per line, `#` starts a comment. Unset keys keep their
/// defaults. `region = point | surface` picks the training region around the base state;
/// `region_<feature> = lo hi` then overrides single axes.
inline RunConfig parse_config(std::istream& is) {
  const auto& bindings = detail::key_bindings();
  RunConfig cfg;
  std::string preset = "point";
  std::vector<std::pair<std::string, std::pair<std::string, std::size_t>>> region_keys;
  std::map<std::string, std::size_t> seen;

  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string body = detail::trim(raw.substr(0, raw.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError(line, "missing key");
    if (!seen.emplace(key, line).second) throw ParseError(line, "duplicate key '" + key + "'");
    if (key == "region") {
      if (value != "point" && value != "surface") throw ParseError(line, "region must be 'point' or 'surface'");
      preset = value;
      continue;
    }
    const auto it = bindings.find(key);
    if (it == bindings.end()) throw ParseError(line, "unknown key '" + key + "'");
    if (key.rfind("region_", 0) == 0) {
      region_keys.push_back({key, {value, line}});
      continue;
    }
    it->second.set(cfg, value, line);
  }

  // T sets the grid horizon; the step count follows from dt.
  const double dt = cfg.train.grid.dt;
  if (!(dt > 0.0) || !(cfg.model.T > 0.0)) throw InvariantViolation("dt", "dt and T must be positive");
  cfg.train.grid = GridSpec::from_step(cfg.model.T, dt);

  cfg.train.region = preset == "surface" ? InitRegion::surface(cfg.train.base) : InitRegion::point(cfg.train.base);
  for (const auto& [key, vl] : region_keys) bindings.at(key).set(cfg, vl.first, vl.second);
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError(0, "cannot open config file " + path);
  return parse_config(is);
}

/// Writes every key; parse_config of the output reproduces `cfg` exactly.
inline void write_config(std::ostream& os, const RunConfig& cfg) {
  for (const auto& [key, b] : detail::key_bindings()) os << key << " = " << b.get(cfg) << '\n';
}

}  // namespace elbsde
