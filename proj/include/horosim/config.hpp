#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "horosim/model.hpp"
#include "horosim/sampler.hpp"

// Run configuration: flat "key = value" lines with dotted section prefixes.
//   # comment lines and trailing comments are ignored
//   lattice.d      = 3
//   lattice.sides  = [4, 4, 4]
//   model.beta     = 2.0
//   model.h_rule   = inverse_volume      # or model.h = <number>
//   model.ensemble = delta               # delta | hmassed
//   chain.kernel   = gibbs               # gibbs | langevin
//   chain.sweeps   = 20000
//   chain.burn_in  = 2000
//   chain.thin     = 1
//   chain.step     = 0.5
//   seed           = 1
//   output.dir     = runs/example
//   output.trace   = false
// plus the subcommand-specific keys listed in the schema below.  Unknown
// keys are rejected; every violation is collected and reported in one pass.
namespace horosim {

struct ConfigError : std::runtime_error {
  std::vector<std::string> violations;
  explicit ConfigError(std::vector<std::string> v)
      : std::runtime_error(join(v)), violations(std::move(v)) {}
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid config:";
    for (const auto& x : v) s += "\n  - " + x;
    return s;
  }
};

struct RunConfig {
  std::string subcommand;

  int lattice_d = 0;
  std::vector<int> lattice_sides;

  double beta = 0.0;
  std::optional<double> h;
  std::string h_rule;  // "inverse_volume" | "inverse_side" | "" (explicit h)
  Ensemble ensemble = Ensemble::DeltaConstrained;

  Kernel kernel = Kernel::GibbsAlternating;
  long sweeps = 20000;
  long burn_in = 2000;
  int thin = 1;
  double step = 0.5;

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool trace = false;

  // certify
  int certify_configs = 100;
  std::vector<double> certify_betas = {1.5, 2.0, 4.0};
  int certify_stride = 50;

  // study
  std::vector<int> study_sides = {4, 6};

  // rmt
  std::string rmt_profile = "exponential";  // exponential | cubes
  int rmt_orbitals = 1;
  double rmt_w = 1.0;
  double rmt_j0 = 1.0;
  double rmt_j1 = 0.25;
  double rmt_energy = 0.0;
  double rmt_eps = 0.5;
  long rmt_draws = 2000;
  int rmt_site_x = 0;
  int rmt_site_y = 0;

  // pushforward
  int push_n = 1;
  int push_bign = 1;
  long push_draws = 200000;

  std::vector<std::string> warnings;

  double resolved_h() const {
    if (h) return *h;
    long vol = 1;
    for (int s : lattice_sides) vol *= s;
    if (h_rule == "inverse_volume") return 1.0 / static_cast<double>(vol);
    if (h_rule == "inverse_side") return 1.0 / static_cast<double>(lattice_sides.at(0));
    throw std::logic_error("resolved_h: no h and no h_rule");
  }

  ModelParams model_params() const {
    ModelParams p;
    p.beta = beta;
    p.h = resolved_h();
    p.ensemble = ensemble;
    return p;
  }

  ChainConfig chain_config() const {
    ChainConfig c;
    c.sweeps = sweeps;
    c.burn_in = burn_in;
    c.thin = thin;
    c.kernel = kernel;
    c.step_size = step;
    return c;
  }

  // Canonical "key = value" rendering of the fully resolved configuration,
  // embedded verbatim in every output file.
  std::vector<std::pair<std::string, std::string>> resolved_pairs() const;
};

namespace detail_config {

struct RawValue {
  std::string text;
  std::vector<std::string> list;
  bool is_list = false;
  int line = 0;
  bool used = false;
};

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::map<std::string, RawValue> tokenize(const std::string& text,
                                                std::vector<std::string>& errors) {
  std::map<std::string, RawValue> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (kv.count(key)) {
      errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      continue;
    }
    RawValue rv;
    rv.line = lineno;
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']') {
        errors.push_back("line " + std::to_string(lineno) + ": unterminated list for '" + key + "'");
        continue;
      }
      rv.is_list = true;
      std::string inner = val.substr(1, val.size() - 2);
      std::string item;
      std::istringstream items(inner);
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (!item.empty()) rv.list.push_back(item);
      }
    } else {
      if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
        val = val.substr(1, val.size() - 2);
      rv.text = val;
    }
    kv[key] = rv;
  }
  return kv;
}

inline bool parse_long(const std::string& s, long& out) {
  try {
    size_t pos = 0;
    out = std::stol(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline bool parse_double(const std::string& s, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace detail_config

inline const std::vector<std::string>& known_subcommands() {
  static const std::vector<std::string> subs = {"simulate", "certify", "ward",
                                                "study",    "rmt",     "pushforward"};
  return subs;
}

// Parse and fully validate a config for the given subcommand.  Throws
// ConfigError carrying every violation found.
inline RunConfig parse_config(const std::string& text, const std::string& subcommand) {
  using namespace detail_config;
  std::vector<std::string> errors;
  if (std::find(known_subcommands().begin(), known_subcommands().end(), subcommand) ==
      known_subcommands().end())
    errors.push_back("unknown subcommand '" + subcommand + "'");

  auto kv = tokenize(text, errors);
  RunConfig cfg;
  cfg.subcommand = subcommand;

  const bool needs_lattice = subcommand != "pushforward";
  const bool needs_model = subcommand == "simulate" || subcommand == "certify" ||
                           subcommand == "ward" || subcommand == "study";

  auto take = [&](const std::string& key) -> RawValue* {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  };
  auto err_at = [&](const RawValue* rv, const std::string& msg) {
    errors.push_back("line " + std::to_string(rv->line) + ": " + msg);
  };
  auto get_long = [&](const std::string& key, long lo, long hi, long& out, bool required) {
    RawValue* rv = take(key);
    if (!rv) {
      if (required) errors.push_back("missing required key '" + key + "'");
      return;
    }
    long v = 0;
    if (rv->is_list || !parse_long(rv->text, v))
      err_at(rv, "'" + key + "' must be an integer");
    else if (v < lo || v > hi)
      err_at(rv, "'" + key + "' = " + rv->text + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
    else
      out = v;
  };
  auto get_int = [&](const std::string& key, long lo, long hi, int& out, bool required) {
    long v = out;
    get_long(key, lo, hi, v, required);
    out = static_cast<int>(v);
  };
  auto get_double = [&](const std::string& key, double lo, double hi, double& out, bool required) {
    RawValue* rv = take(key);
    if (!rv) {
      if (required) errors.push_back("missing required key '" + key + "'");
      return;
    }
    double v = 0;
    if (rv->is_list || !parse_double(rv->text, v))
      err_at(rv, "'" + key + "' must be a number");
    else if (!(v >= lo && v <= hi))
      err_at(rv, "'" + key + "' = " + rv->text + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
    else
      out = v;
  };
  auto get_bool = [&](const std::string& key, bool& out) {
    RawValue* rv = take(key);
    if (!rv) return;
    if (rv->text == "true")
      out = true;
    else if (rv->text == "false")
      out = false;
    else
      err_at(rv, "'" + key + "' must be true or false");
  };
  auto get_string = [&](const std::string& key, const std::vector<std::string>& allowed,
                        std::string& out) {
    RawValue* rv = take(key);
    if (!rv) return;
    if (rv->is_list) {
      err_at(rv, "'" + key + "' must be a string");
      return;
    }
    if (!allowed.empty() &&
        std::find(allowed.begin(), allowed.end(), rv->text) == allowed.end()) {
      std::string opts;
      for (const auto& a : allowed) opts += (opts.empty() ? "" : " | ") + a;
      err_at(rv, "'" + key + "' must be one of: " + opts);
      return;
    }
    out = rv->text;
  };

  // lattice
  if (needs_lattice) {
    get_int("lattice.d", 1, 6, cfg.lattice_d, true);
    RawValue* rv = take("lattice.sides");
    if (!rv) {
      errors.push_back("missing required key 'lattice.sides'");
    } else if (!rv->is_list) {
      err_at(rv, "'lattice.sides' must be a list, e.g. [4, 4, 4]");
    } else {
      for (const auto& item : rv->list) {
        long v = 0;
        if (!parse_long(item, v) || v < 2 || v > 512)
          err_at(rv, "'lattice.sides' entries must be integers in [2, 512], got '" + item + "'");
        else
          cfg.lattice_sides.push_back(static_cast<int>(v));
      }
      if (cfg.lattice_d > 0 && static_cast<int>(rv->list.size()) != cfg.lattice_d)
        err_at(rv, "'lattice.sides' has " + std::to_string(rv->list.size()) +
                       " entries but lattice.d = " + std::to_string(cfg.lattice_d));
      for (int s : cfg.lattice_sides)
        if (s == 2)
          cfg.warnings.push_back(
              "side length 2: opposite neighbors coincide, single edges are used");
    }
  }

  // model
  if (needs_model) {
    get_double("model.beta", 1e-6, 1e6, cfg.beta, true);
    double hval = -1.0;
    get_double("model.h", 0.0, 1e6, hval, false);
    if (hval >= 0.0) cfg.h = hval;
    get_string("model.h_rule", {"inverse_volume", "inverse_side"}, cfg.h_rule);
    if (!cfg.h && cfg.h_rule.empty())
      errors.push_back("one of 'model.h' or 'model.h_rule' is required");
    if (cfg.h && !cfg.h_rule.empty())
      errors.push_back("'model.h' and 'model.h_rule' are mutually exclusive");
    std::string ens = "delta";
    get_string("model.ensemble", {"delta", "hmassed"}, ens);
    cfg.ensemble = ens == "delta" ? Ensemble::DeltaConstrained : Ensemble::HMassed;
    if (cfg.ensemble == Ensemble::HMassed && cfg.h && *cfg.h == 0.0)
      errors.push_back("'model.ensemble = hmassed' requires h > 0");

    std::string kern = "gibbs";
    get_string("chain.kernel", {"gibbs", "langevin"}, kern);
    cfg.kernel = kern == "gibbs" ? Kernel::GibbsAlternating : Kernel::MarginalLangevin;
    get_long("chain.sweeps", 8, 100000000, cfg.sweeps, false);
    get_long("chain.burn_in", 0, 100000000, cfg.burn_in, false);
    get_int("chain.thin", 1, 100000, cfg.thin, false);
    get_double("chain.step", 1e-6, 100.0, cfg.step, false);
    if (cfg.burn_in >= cfg.sweeps)
      errors.push_back("'chain.burn_in' must be smaller than 'chain.sweeps'");
    else if ((cfg.sweeps - cfg.burn_in) / cfg.thin < 16)
      errors.push_back(
          "too few measurements: need (chain.sweeps - chain.burn_in) / chain.thin >= 16");

    if (subcommand == "certify" && cfg.beta > 0.0 && cfg.beta < 1.5)
      cfg.warnings.push_back("beta = " + std::to_string(cfg.beta) +
                             " < 3/2: the convexity certificate is not guaranteed");
  }

  {
    long seed = 1;
    get_long("seed", 0, std::numeric_limits<long>::max(), seed, false);
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
  get_string("output.dir", {}, cfg.out_dir);
  get_bool("output.trace", cfg.trace);

  if (subcommand == "certify") {
    get_int("certify.configs", 1, 100000, cfg.certify_configs, false);
    get_int("certify.stride", 1, 100000, cfg.certify_stride, false);
    RawValue* rv = take("certify.betas");
    if (rv) {
      if (!rv->is_list) {
        err_at(rv, "'certify.betas' must be a list");
      } else {
        cfg.certify_betas.clear();
        for (const auto& item : rv->list) {
          double v = 0;
          if (!parse_double(item, v) || !(v > 0))
            err_at(rv, "'certify.betas' entries must be positive numbers");
          else
            cfg.certify_betas.push_back(v);
        }
        for (double b : cfg.certify_betas) {
          if (b < 1.5)
            cfg.warnings.push_back("certify.betas entry " + std::to_string(b) +
                                   " < 3/2: the convexity certificate is not guaranteed");
        }
      }
    }
  }
  if (subcommand == "study") {
    RawValue* rv = take("study.sides");
    if (rv) {
      if (!rv->is_list) {
        err_at(rv, "'study.sides' must be a list");
      } else {
        cfg.study_sides.clear();
        for (const auto& item : rv->list) {
          long v = 0;
          if (!parse_long(item, v) || v < 2 || v > 64)
            err_at(rv, "'study.sides' entries must be integers in [2, 64]");
          else
            cfg.study_sides.push_back(static_cast<int>(v));
        }
      }
    }
  }
  if (subcommand == "rmt") {
    get_string("rmt.profile", {"exponential", "cubes"}, cfg.rmt_profile);
    get_int("rmt.orbitals", 1, 64, cfg.rmt_orbitals, false);
    get_double("rmt.w", 0.0, 1000.0, cfg.rmt_w, false);
    get_double("rmt.j0", 1e-9, 1e6, cfg.rmt_j0, false);
    get_double("rmt.j1", 0.0, 1e6, cfg.rmt_j1, false);
    get_double("rmt.energy", -1e6, 1e6, cfg.rmt_energy, false);
    get_double("rmt.eps", 1e-9, 1e6, cfg.rmt_eps, false);
    get_long("rmt.draws", 16, 100000000, cfg.rmt_draws, false);
    get_int("rmt.site_x", 0, 1 << 26, cfg.rmt_site_x, false);
    get_int("rmt.site_y", 0, 1 << 26, cfg.rmt_site_y, false);
  }
  if (subcommand == "pushforward") {
    get_int("pushforward.n", 1, 3, cfg.push_n, false);
    get_int("pushforward.N", 1, 8, cfg.push_bign, false);
    get_long("pushforward.draws", 100, 100000000, cfg.push_draws, false);
    if (cfg.push_bign < cfg.push_n)
      errors.push_back("'pushforward.N' must be >= 'pushforward.n'");
  }

  for (const auto& [key, rv] : kv)
    if (!rv.used)
      errors.push_back("line " + std::to_string(rv.line) + ": unknown key '" + key +
                       "' for subcommand '" + subcommand + "'");

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

inline std::vector<std::pair<std::string, std::string>> RunConfig::resolved_pairs() const {
  std::vector<std::pair<std::string, std::string>> p;
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  p.emplace_back("subcommand", subcommand);
  if (subcommand != "pushforward") {
    p.emplace_back("lattice.d", std::to_string(lattice_d));
    std::string sides = "[";
    for (size_t i = 0; i < lattice_sides.size(); ++i)
      sides += (i ? ", " : "") + std::to_string(lattice_sides[i]);
    sides += "]";
    p.emplace_back("lattice.sides", sides);
  }
  const bool has_model = subcommand == "simulate" || subcommand == "certify" ||
                         subcommand == "ward" || subcommand == "study";
  if (has_model) {
    p.emplace_back("model.beta", num(beta));
    p.emplace_back("model.h", num(resolved_h()));
    if (!h_rule.empty()) p.emplace_back("model.h_rule", h_rule);
    p.emplace_back("model.ensemble", ensemble == Ensemble::DeltaConstrained ? "delta" : "hmassed");
    p.emplace_back("chain.kernel", kernel == Kernel::GibbsAlternating ? "gibbs" : "langevin");
    p.emplace_back("chain.sweeps", std::to_string(sweeps));
    p.emplace_back("chain.burn_in", std::to_string(burn_in));
    p.emplace_back("chain.thin", std::to_string(thin));
    p.emplace_back("chain.step", num(step));
  }
  p.emplace_back("seed", std::to_string(seed));
  if (subcommand == "certify") {
    p.emplace_back("certify.configs", std::to_string(certify_configs));
    p.emplace_back("certify.stride", std::to_string(certify_stride));
    std::string bs = "[";
    for (size_t i = 0; i < certify_betas.size(); ++i) bs += (i ? ", " : "") + num(certify_betas[i]);
    p.emplace_back("certify.betas", bs + "]");
  }
  if (subcommand == "study") {
    std::string ss = "[";
    for (size_t i = 0; i < study_sides.size(); ++i)
      ss += (i ? ", " : "") + std::to_string(study_sides[i]);
    p.emplace_back("study.sides", ss + "]");
  }
  if (subcommand == "rmt") {
    p.emplace_back("rmt.profile", rmt_profile);
    p.emplace_back("rmt.orbitals", std::to_string(rmt_orbitals));
    p.emplace_back("rmt.w", num(rmt_w));
    p.emplace_back("rmt.j0", num(rmt_j0));
    p.emplace_back("rmt.j1", num(rmt_j1));
    p.emplace_back("rmt.energy", num(rmt_energy));
    p.emplace_back("rmt.eps", num(rmt_eps));
    p.emplace_back("rmt.draws", std::to_string(rmt_draws));
    p.emplace_back("rmt.site_x", std::to_string(rmt_site_x));
    p.emplace_back("rmt.site_y", std::to_string(rmt_site_y));
  }
  if (subcommand == "pushforward") {
    p.emplace_back("pushforward.n", std::to_string(push_n));
    p.emplace_back("pushforward.N", std::to_string(push_bign));
    p.emplace_back("pushforward.draws", std::to_string(push_draws));
  }
  return p;
}

}  // namespace horosim
