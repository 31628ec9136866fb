#pragma once

// JSON (de)serialisation of simulation configs. Every key is optional and
// falls back to the built-in default; unknown keys and wrong types are
// rejected with the offending field path.

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "ternblend/solver.hpp"

namespace ternblend {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Walks one JSON object, reading known keys and rejecting the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field(key) + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          throw ConfigError(field(key) + ": expected a non-negative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    }
    out = v.get<T>();
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json to_json(const GridSpec& g) {
  return json{{"nx", g.nx}, {"ny", g.ny}, {"lx", g.lx}, {"ly", g.ly}};
}

inline json to_json(const BlendParams& p) {
  return json{{"n_a", p.n_a},       {"n_b", p.n_b},       {"n_c", p.n_c},
              {"chi_ab", p.chi_ab}, {"chi_ac", p.chi_ac}, {"chi_bc", p.chi_bc},
              {"r_g", p.r_g},       {"d_p", p.d_p},       {"d_ab", p.d_ab}};
}

inline json to_json(const SimConfig& c) {
  return json{{"grid", to_json(c.grid)},
              {"params", to_json(c.params)},
              {"a0", c.a0},
              {"b0", c.b0},
              {"t_end", c.t_end},
              {"dt", c.dt},
              {"noise_amp", c.noise_amp},
              {"seed", c.rng_seed},
              {"snapshot_every", c.snapshot_every},
              {"newton_tol", c.newton_tol},
              {"newton_max_iter", c.newton_max_iter},
              {"picard_damping", c.picard_damping},
              {"linear_tol", c.linear_tol}};
}

inline void read_into(const json& j, const std::string& path, GridSpec& g) {
  ObjectReader r(j, path);
  r.get("nx", g.nx);
  r.get("ny", g.ny);
  r.get("lx", g.lx);
  r.get("ly", g.ly);
  r.finish();
}

inline void read_into(const json& j, const std::string& path, BlendParams& p) {
  ObjectReader r(j, path);
  r.get("n_a", p.n_a);
  r.get("n_b", p.n_b);
  r.get("n_c", p.n_c);
  r.get("chi_ab", p.chi_ab);
  r.get("chi_ac", p.chi_ac);
  r.get("chi_bc", p.chi_bc);
  r.get("r_g", p.r_g);
  r.get("d_p", p.d_p);
  r.get("d_ab", p.d_ab);
  r.finish();
}

/// Overlays `j` onto `c`. Validation is left to the caller.
inline void read_into(const json& j, const std::string& path, SimConfig& c) {
  ObjectReader r(j, path);
  if (const json* g = r.child("grid")) read_into(*g, r.field("grid"), c.grid);
  if (const json* p = r.child("params")) read_into(*p, r.field("params"), c.params);
  r.get("a0", c.a0);
  r.get("b0", c.b0);
  r.get("t_end", c.t_end);
  r.get("dt", c.dt);
  r.get("noise_amp", c.noise_amp);
  r.get("seed", c.rng_seed);
  r.get("snapshot_every", c.snapshot_every);
  r.get("newton_tol", c.newton_tol);
  r.get("newton_max_iter", c.newton_max_iter);
  r.get("picard_damping", c.picard_damping);
  r.get("linear_tol", c.linear_tol);
  r.finish();
}

inline json load_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

inline void save_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
}

/// Runs validate() and rethrows failures as ConfigError.
template <class T>
void validate_config(const T& cfg) {
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace ternblend
