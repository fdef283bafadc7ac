#pragma once

// Sectioned key = value configuration text.
//
//   [core]        dimension alpha seed
//   [sampler]     kind count total_charge z_scale v_scale tail_index center drift
//   [field]       softening softening_factor probe_particles probe_grid_points probe_radius_factor
//   [dynamics]    field_disabled dt0 growth dt_max dt_rel_max t_end cadence every_steps per_decade
//   [diagnostics] moment_n grid_cells grid_radius_factor lp_exponent velocity_cells
//                 velocity_softening profile_grid_points profile_radius_factor
//   [verify]      checks ...window tolerances and experiment sizes
//   [output]      dir
//
// Unknown sections and keys are rejected. to_text() writes every key in a
// fixed order, which is the form embedded in artifacts.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simulation.hpp"

namespace vlasov {

inline constexpr const char* kFormatVersion = "vpsim-1";

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{"virial", "interpolation", "lrho", "em", "le",
                                              "small-data", "bootstrap", "scattering", "profiles"};
  return names;
}

struct Window {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Window&) const = default;
};

struct VerifySettings {
  std::vector<std::string> checks;
  Window decay_window{10.0, 100.0};    ///< field, density, L2 and profile fits
  Window scatter_window{5.0, 50.0};
  double virial_tolerance = 1e-3;
  int interpolation_cases = 1000;
  double interpolation_tolerance = 1e-12;
  double lrho_k = 2.0;
  double ratio_cap = 10.0;
  double small_data_n = 13.0;
  double small_data_epsilon = 1e-2;
  int le_clouds = 20;
  int le_particles = 64;
  double le_p = 1.5;
  double le_q = std::numeric_limits<double>::infinity();
  double le_tolerance = 0.05;
  double bootstrap_decades = 1.0;
  double exponent_slack = 0.3;
  bool operator==(const VerifySettings&) const = default;
};

struct ExperimentConfig {
  RunConfig run;
  VerifySettings verify;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& field, const std::string& what)
      : std::runtime_error(format(line, field, what)), line(line), field(field) {}
  int line;
  std::string field;

 private:
  static std::string format(int line, const std::string& field, const std::string& what) {
    std::string s = "config";
    if (line > 0) s += " line " + std::to_string(line);
    if (!field.empty()) s += " [" + field + "]";
    return s + ": " + what;
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s.empty() || std::isspace(static_cast<unsigned char>(s[0]))) throw std::invalid_argument("not a number");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::invalid_argument("not a number");
  if (*end != '\0') throw std::invalid_argument("trailing characters");
  if (!std::isfinite(v)) throw std::invalid_argument("not finite");
  return v;
}

inline long long parse_int(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true or false");
}

inline std::vector<double> parse_vector(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_double(item));
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt_double(v[k]);
  return s;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + v[k];
  return s;
}

struct ConfigKey {
  std::string section;
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
ConfigKey real_key(std::string sec, std::string name, T ExperimentConfig::*part, double T::*field) {
  return {std::move(sec), std::move(name),
          [=](ExperimentConfig& c, const std::string& s) { (c.*part).*field = parse_double(s); },
          [=](const ExperimentConfig& c) { return fmt_double((c.*part).*field); }};
}

template <class T, class I>
ConfigKey int_key(std::string sec, std::string name, T ExperimentConfig::*part, I T::*field) {
  return {std::move(sec), std::move(name),
          [=](ExperimentConfig& c, const std::string& s) {
            const long long v = parse_int(s);
            if (v < static_cast<long long>(std::numeric_limits<I>::min()) ||
                static_cast<unsigned long long>(v) > static_cast<unsigned long long>(std::numeric_limits<I>::max()))
              throw std::out_of_range("integer out of range");
            (c.*part).*field = static_cast<I>(v);
          },
          [=](const ExperimentConfig& c) { return std::to_string((c.*part).*field); }};
}

inline Window parse_window(const std::string& s) {
  const auto v = parse_vector(s);
  if (v.size() != 2 || !(v[0] < v[1])) throw std::invalid_argument("expected 'lo, hi' with lo < hi");
  return {v[0], v[1]};
}

inline const std::vector<ConfigKey>& config_keys() {
  using E = ExperimentConfig;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    const auto run = &E::run;
    const auto ver = &E::verify;
    k.push_back(int_key("core", "dimension", run, &RunConfig::dimension));
    k.push_back(real_key("core", "alpha", run, &RunConfig::alpha));
    k.push_back({"core", "seed",
                 [](E& c, const std::string& s) {
                   if (!s.empty() && s[0] == '-') throw std::invalid_argument("seed must be non-negative");
                   std::size_t used = 0;
                   c.run.seed = std::stoull(s, &used);
                   if (used != s.size()) throw std::invalid_argument("trailing characters");
                 },
                 [](const E& c) { return std::to_string(c.run.seed); }});

    k.push_back({"sampler", "kind", [](E& c, const std::string& s) { c.run.sampler.kind = parse_sampler_kind(s); },
                 [](const E& c) { return std::string(to_string(c.run.sampler.kind)); }});
    k.push_back({"sampler", "count",
                 [](E& c, const std::string& s) {
                   const long long v = parse_int(s);
                   if (v < 1) throw std::invalid_argument("count must be >= 1");
                   c.run.sampler.count = static_cast<std::size_t>(v);
                 },
                 [](const E& c) { return std::to_string(c.run.sampler.count); }});
    k.push_back({"sampler", "total_charge", [](E& c, const std::string& s) { c.run.sampler.total_charge = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.sampler.total_charge); }});
    k.push_back({"sampler", "z_scale", [](E& c, const std::string& s) { c.run.sampler.z_scale = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.sampler.z_scale); }});
    k.push_back({"sampler", "v_scale", [](E& c, const std::string& s) { c.run.sampler.v_scale = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.sampler.v_scale); }});
    k.push_back({"sampler", "tail_index", [](E& c, const std::string& s) { c.run.sampler.tail_index = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.sampler.tail_index); }});
    k.push_back({"sampler", "center", [](E& c, const std::string& s) { c.run.sampler.center = parse_vector(s); },
                 [](const E& c) { return join(c.run.sampler.center); }});
    k.push_back({"sampler", "drift", [](E& c, const std::string& s) { c.run.sampler.drift = parse_vector(s); },
                 [](const E& c) { return join(c.run.sampler.drift); }});

    k.push_back({"field", "softening",
                 [](E& c, const std::string& s) {
                   if (s == "auto") {
                     c.run.softening.reset();
                     return;
                   }
                   const double v = parse_double(s);
                   if (!(v >= 0.0) || std::isinf(v)) throw std::invalid_argument("softening must be 'auto' or >= 0");
                   c.run.softening = v;
                 },
                 [](const E& c) { return c.run.softening ? fmt_double(*c.run.softening) : std::string("auto"); }});
    k.push_back(real_key("field", "softening_factor", run, &RunConfig::softening_factor));
    k.push_back({"field", "probe_particles", [](E& c, const std::string& s) { c.run.probe.include_particles = parse_bool(s); },
                 [](const E& c) { return std::string(c.run.probe.include_particles ? "true" : "false"); }});
    k.push_back({"field", "probe_grid_points",
                 [](E& c, const std::string& s) { c.run.probe.grid_points = static_cast<int>(parse_int(s)); },
                 [](const E& c) { return std::to_string(c.run.probe.grid_points); }});
    k.push_back({"field", "probe_radius_factor", [](E& c, const std::string& s) { c.run.probe.radius_factor = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.probe.radius_factor); }});

    k.push_back({"dynamics", "field_disabled", [](E& c, const std::string& s) { c.run.field_enabled = !parse_bool(s); },
                 [](const E& c) { return std::string(c.run.field_enabled ? "false" : "true"); }});
    k.push_back({"dynamics", "dt0", [](E& c, const std::string& s) { c.run.schedule.dt0 = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.schedule.dt0); }});
    k.push_back({"dynamics", "growth", [](E& c, const std::string& s) { c.run.schedule.growth = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.schedule.growth); }});
    k.push_back({"dynamics", "dt_max", [](E& c, const std::string& s) { c.run.schedule.dt_max = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.schedule.dt_max); }});
    k.push_back({"dynamics", "dt_rel_max", [](E& c, const std::string& s) { c.run.schedule.dt_rel_max = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.schedule.dt_rel_max); }});
    k.push_back({"dynamics", "t_end", [](E& c, const std::string& s) { c.run.schedule.t_end = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.schedule.t_end); }});
    k.push_back({"dynamics", "cadence",
                 [](E& c, const std::string& s) {
                   if (s == "every") c.run.schedule.cadence = CadenceMode::every;
                   else if (s == "geometric") c.run.schedule.cadence = CadenceMode::geometric;
                   else throw std::invalid_argument("expected 'every' or 'geometric'");
                 },
                 [](const E& c) {
                   return std::string(c.run.schedule.cadence == CadenceMode::every ? "every" : "geometric");
                 }});
    k.push_back({"dynamics", "every_steps",
                 [](E& c, const std::string& s) { c.run.schedule.every_steps = static_cast<int>(parse_int(s)); },
                 [](const E& c) { return std::to_string(c.run.schedule.every_steps); }});
    k.push_back({"dynamics", "per_decade", [](E& c, const std::string& s) { c.run.schedule.per_decade = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.schedule.per_decade); }});

    k.push_back(real_key("diagnostics", "moment_n", run, &RunConfig::moment_n));
    k.push_back(int_key("diagnostics", "grid_cells", run, &RunConfig::grid_cells));
    k.push_back(real_key("diagnostics", "grid_radius_factor", run, &RunConfig::grid_radius_factor));
    k.push_back(real_key("diagnostics", "lp_exponent", run, &RunConfig::lp_exponent));
    k.push_back(int_key("diagnostics", "velocity_cells", run, &RunConfig::velocity_cells));
    k.push_back(real_key("diagnostics", "velocity_softening", run, &RunConfig::velocity_softening));
    k.push_back({"diagnostics", "profile_grid_points",
                 [](E& c, const std::string& s) { c.run.profile_probe.grid_points = static_cast<int>(parse_int(s)); },
                 [](const E& c) { return std::to_string(c.run.profile_probe.grid_points); }});
    k.push_back({"diagnostics", "profile_radius_factor",
                 [](E& c, const std::string& s) { c.run.profile_probe.radius_factor = parse_double(s); },
                 [](const E& c) { return fmt_double(c.run.profile_probe.radius_factor); }});

    k.push_back({"verify", "checks",
                 [](E& c, const std::string& s) {
                   auto list = split_list(s);
                   for (const auto& name : list)
                     if (std::find(known_checks().begin(), known_checks().end(), name) == known_checks().end())
                       throw std::invalid_argument("unknown check '" + name + "'");
                   c.verify.checks = std::move(list);
                 },
                 [](const E& c) { return join(c.verify.checks); }});
    k.push_back({"verify", "decay_window", [](E& c, const std::string& s) { c.verify.decay_window = parse_window(s); },
                 [](const E& c) { return join(std::vector<double>{c.verify.decay_window.lo, c.verify.decay_window.hi}); }});
    k.push_back({"verify", "scatter_window", [](E& c, const std::string& s) { c.verify.scatter_window = parse_window(s); },
                 [](const E& c) {
                   return join(std::vector<double>{c.verify.scatter_window.lo, c.verify.scatter_window.hi});
                 }});
    k.push_back(real_key("verify", "virial_tolerance", ver, &VerifySettings::virial_tolerance));
    k.push_back(int_key("verify", "interpolation_cases", ver, &VerifySettings::interpolation_cases));
    k.push_back(real_key("verify", "interpolation_tolerance", ver, &VerifySettings::interpolation_tolerance));
    k.push_back(real_key("verify", "lrho_k", ver, &VerifySettings::lrho_k));
    k.push_back(real_key("verify", "ratio_cap", ver, &VerifySettings::ratio_cap));
    k.push_back(real_key("verify", "small_data_n", ver, &VerifySettings::small_data_n));
    k.push_back(real_key("verify", "small_data_epsilon", ver, &VerifySettings::small_data_epsilon));
    k.push_back(int_key("verify", "le_clouds", ver, &VerifySettings::le_clouds));
    k.push_back(int_key("verify", "le_particles", ver, &VerifySettings::le_particles));
    k.push_back(real_key("verify", "le_p", ver, &VerifySettings::le_p));
    k.push_back(real_key("verify", "le_q", ver, &VerifySettings::le_q));
    k.push_back(real_key("verify", "le_tolerance", ver, &VerifySettings::le_tolerance));
    k.push_back(real_key("verify", "bootstrap_decades", ver, &VerifySettings::bootstrap_decades));
    k.push_back(real_key("verify", "exponent_slack", ver, &VerifySettings::exponent_slack));

    k.push_back({"output", "dir", [](E& c, const std::string& s) { c.run.output_dir = s; },
                 [](const E& c) { return c.run.output_dir; }});
    return k;
  }();
  return keys;
}

}  // namespace detail

/// Semantic checks that do not need a sampled ensemble.
inline void validate(const ExperimentConfig& c) {
  const RunConfig& r = c.run;
  auto fail = [](const std::string& field, const std::string& what) { throw ConfigError(0, field, what); };
  if (r.dimension < 2 || r.dimension > detail::max_dim) fail("core.dimension", "must be in [2, 16]");
  if (!(r.alpha >= 0.0) || !std::isfinite(r.alpha)) fail("core.alpha", "must be finite and >= 0");
  if (!(r.sampler.total_charge > 0.0)) fail("sampler.total_charge", "must be positive");
  if (!(r.sampler.z_scale > 0.0)) fail("sampler.z_scale", "must be positive");
  if (!(r.sampler.v_scale > 0.0)) fail("sampler.v_scale", "must be positive");
  if (!r.sampler.center.empty() && r.sampler.center.size() != static_cast<std::size_t>(r.dimension))
    fail("sampler.center", "needs one entry per dimension");
  if (!r.sampler.drift.empty() && r.sampler.drift.size() != static_cast<std::size_t>(r.dimension))
    fail("sampler.drift", "needs one entry per dimension");
  if (!(r.softening_factor > 0.0)) fail("field.softening_factor", "must be positive");
  if (r.probe.grid_points < 0) fail("field.probe_grid_points", "must be >= 0");
  if (!(r.probe.radius_factor > 0.0)) fail("field.probe_radius_factor", "must be positive");
  try {
    r.schedule.validate();
  } catch (const DomainError& e) {
    fail("dynamics", e.what());
  }
  if (r.moment_n < 0.0) fail("diagnostics.moment_n", "must be >= 0 (0 selects d(d-1)+1)");
  if (r.grid_cells < 1) fail("diagnostics.grid_cells", "must be >= 1");
  if (!(r.grid_radius_factor > 0.0)) fail("diagnostics.grid_radius_factor", "must be positive");
  if (!(r.lp_exponent >= 1.0)) fail("diagnostics.lp_exponent", "must be >= 1");
  if (r.velocity_cells < 3) fail("diagnostics.velocity_cells", "must be >= 3");
  if (r.velocity_softening < 0.0) fail("diagnostics.velocity_softening", "must be >= 0");
  if (r.profile_probe.grid_points < 1) fail("diagnostics.profile_grid_points", "must be >= 1");
  const VerifySettings& v = c.verify;
  if (v.interpolation_cases < 1) fail("verify.interpolation_cases", "must be >= 1");
  if (v.le_clouds < 1 || v.le_particles < 1) fail("verify.le_clouds", "cloud count and size must be >= 1");
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  const auto& keys = detail::config_keys();
  std::vector<bool> seen(keys.size(), false);
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "", "malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      const bool known = std::any_of(keys.begin(), keys.end(), [&](const auto& k) { return k.section == section; });
      if (!known) throw ConfigError(line_no, section, "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "", "expected 'key = value'");
    const std::string name = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string where = section + "." + name;
    if (section.empty()) throw ConfigError(line_no, name, "key outside any section");
    std::size_t idx = keys.size();
    for (std::size_t k = 0; k < keys.size(); ++k)
      if (keys[k].section == section && keys[k].name == name) idx = k;
    if (idx == keys.size()) throw ConfigError(line_no, where, "unknown key");
    if (seen[idx]) throw ConfigError(line_no, where, "duplicate key");
    seen[idx] = true;
    try {
      keys[idx].set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(line_no, where, std::string("invalid value '") + value + "': " + e.what());
    }
  }
  validate(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical text: every key, fixed order, round-trips through parse_config.
inline std::string to_text(const ExperimentConfig& cfg) {
  std::string out, section;
  for (const auto& k : detail::config_keys()) {
    if (k.section != section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

}  // namespace vlasov
