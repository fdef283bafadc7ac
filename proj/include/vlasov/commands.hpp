#pragma once

// simulate / verify / fit / plot, shared by the vpsim tool and the tests.
//
// Exit codes: 0 success, 1 an asserted check failed, 2 bad input
// (config, CSV, arguments), 3 the integration aborted (partial artifacts
// are still written).

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "simulation.hpp"
#include "verify.hpp"

namespace vlasov {

inline constexpr const char* kOutputRootVariable = "VPSIM_OUTPUT_ROOT";

struct CommandOptions {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int threads = -1;  ///< < 0 leaves the current setting
  std::vector<std::string> checks;
  std::ostream* log = &std::cout;
  std::ostream* err = &std::cerr;
};

/// --out, then [output] dir, then $VPSIM_OUTPUT_ROOT, then ./vpsim-out.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const CommandOptions& opt) {
  if (opt.out) return *opt.out;
  if (!cfg.run.output_dir.empty()) return cfg.run.output_dir;
  if (const char* root = std::getenv(kOutputRootVariable); root && *root) return root;
  return "vpsim-out";
}

namespace detail {

inline void apply_overrides(ExperimentConfig& cfg, const CommandOptions& opt) {
  if (opt.seed) cfg.run.seed = *opt.seed;
  if (!opt.checks.empty()) {
    for (const auto& c : opt.checks)
      if (std::find(known_checks().begin(), known_checks().end(), c) == known_checks().end())
        throw ConfigError(0, "--checks", "unknown check '" + c + "'");
    cfg.verify.checks = opt.checks;
  }
  if (opt.threads >= 0) set_thread_count(static_cast<unsigned>(opt.threads));
}

inline Json run_summary(const RunResult& r, const std::optional<std::string>& aborted) {
  Json j;
  j["steps"] = r.steps;
  j["softening"] = json_number(r.softening);
  j["records"] = r.records.size();
  j["final_time"] = r.records.empty() ? Json(nullptr) : json_number(r.records.back().t);
  j["completed"] = !aborted.has_value();
  if (aborted) j["abort_reason"] = *aborted;
  if (!r.records.empty()) {
    const auto& a = r.records.front();
    const auto& b = r.records.back();
    const double h0 = a.ke + 0.5 * a.pe, h1 = b.ke + 0.5 * b.pe;
    j["energy_initial"] = json_number(h0);
    j["energy_final"] = json_number(h1);
    j["max_escaped_frac"] = json_number(
        std::max_element(r.records.begin(), r.records.end(),
                         [](const auto& x, const auto& y) { return x.escaped_frac < y.escaped_frac; })
            ->escaped_frac);
  }
  return j;
}

inline void write_run_artifacts(const std::filesystem::path& dir, const RunResult& r, const std::string& config_text,
                                const std::optional<std::string>& aborted) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "series.csv");
    write_series_csv(csv, r.records, config_text);
  }
  if (!r.snapshots.empty()) write_snapshot_file(dir / "final.snap", r.snapshots.back(), config_text);
  write_json(dir / "summary.json", envelope("run", run_summary(r, aborted), config_text));
}

}  // namespace detail

inline int cmd_simulate(const std::string& config_path, const CommandOptions& opt = {}) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    detail::apply_overrides(cfg, opt);
  } catch (const ConfigError& e) {
    *opt.err << "error: " << e.what() << "\n";
    return 2;
  }
  const auto dir = resolve_output_dir(cfg, opt);
  const std::string text = to_text(cfg);
  try {
    const RunResult r = run(cfg.run);
    detail::write_run_artifacts(dir, r, text, std::nullopt);
    *opt.log << "simulate: " << r.records.size() << " records, " << r.steps << " steps, softening "
             << detail::fmt_double(r.softening) << " -> " << dir.string() << "\n";
    return 0;
  } catch (const RunAborted& e) {
    detail::write_run_artifacts(dir, e.partial_result, text, std::string(e.what()));
    *opt.err << "error: run aborted: " << e.what() << " (partial artifacts in " << dir.string() << ")\n";
    return 3;
  } catch (const DomainError& e) {
    *opt.err << "error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------
// verify

enum class CheckStatus { pass, fail, warn, rejected, error };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::warn: return "warn";
    case CheckStatus::rejected: return "rejected";
    case CheckStatus::error: return "error";
  }
  return "?";
}

struct CheckOutcome {
  std::string name;
  CheckStatus status = CheckStatus::error;
  std::string message;
  Json body;
  /// Asserted checks gate the exit status; everything except a monitored
  /// warning does.
  bool gates() const { return status != CheckStatus::pass && status != CheckStatus::warn; }
};

namespace detail {

inline Json to_json(const IdentityReport& r) {
  return Json{{"epsilon", json_number(r.epsilon)},
              {"dt", json_number(r.dt)},
              {"tolerance", json_number(r.tolerance)},
              {"scale", json_number(r.scale)},
              {"max_pointwise_residual", json_number(r.max_pointwise_residual)},
              {"max_integrated_drift", json_number(r.max_integrated_drift)},
              {"max_energy_drift", json_number(r.max_energy_drift)},
              {"dq_negative_everywhere", r.dq_negative_everywhere},
              {"pass", r.pass},
              {"t", json_array(r.t)},
              {"q", json_array(r.q)},
              {"dq_dt", json_array(r.dq_dt)},
              {"rhs", json_array(r.rhs)},
              {"softening_term", json_array(r.softening_term)}};
}

/// Evaluated lazily: only checks that consume the trajectory pay for it.
class SharedRun {
 public:
  explicit SharedRun(const RunConfig& cfg) : cfg_(cfg) {}
  const RunResult& get() {
    if (!done_) {
      done_ = true;
      try {
        result_ = run(cfg_);
      } catch (const RunAborted& e) {
        result_ = e.partial_result;
        abort_ = e.what();
      }
    }
    if (abort_) throw PreconditionError("trajectory aborted: " + *abort_);
    return *result_;
  }
  const std::optional<RunResult>& result() const { return result_; }
  const std::optional<std::string>& abort_reason() const { return abort_; }

 private:
  RunConfig cfg_;
  bool done_ = false;
  std::optional<RunResult> result_;
  std::optional<std::string> abort_;
};

inline CheckStatus status_of(bool assert_ok, bool monitor_ok = true) {
  if (!assert_ok) return CheckStatus::fail;
  return monitor_ok ? CheckStatus::pass : CheckStatus::warn;
}

inline CheckOutcome run_check(const std::string& name, const ExperimentConfig& cfg, SharedRun& shared) {
  CheckOutcome o;
  o.name = name;
  const RunConfig& rc = cfg.run;
  const VerifySettings& vs = cfg.verify;
  const int d = rc.dimension;
  const double alpha = rc.alpha;
  const Window& w = vs.decay_window;
  if (name == "virial") {
    const auto& s = rc.schedule;
    if (!s.fixed_step() || s.cadence != CadenceMode::every) throw PreconditionError("virial check: fixed-dt required");
    const auto rep = check_virial_identity(shared.get(), vs.virial_tolerance);
    o.body = to_json(rep);
    o.status = status_of(rep.pass);
  } else if (name == "interpolation") {
    const auto suite = moment_interpolation_suite(d, vs.interpolation_cases, rc.seed, vs.interpolation_tolerance);
    Json failures = Json::array();
    for (const auto& c : suite.cases)
      if (!c.report.pass)
        failures.push_back(Json{{"seed", c.seed}, {"l", c.l}, {"p", c.p}, {"q", c.q}, {"report", vlasov::to_json(c.report)}});
    o.body = Json{{"cases", suite.cases.size()}, {"failures", suite.failures}, {"max_ratio", json_number(suite.max_ratio)},
                  {"tolerance", vs.interpolation_tolerance}, {"failed_cases", failures}, {"pass", suite.pass}};
    o.status = status_of(suite.pass);
  } else if (name == "lrho") {
    const RunResult& r = shared.get();
    const auto t = r.times();
    const auto rho = column(r.records, [](const auto& x) { return x.rho_sup; });
    const auto decay = check_exponent("density_sup", t, rho, alpha, w.lo, w.hi, -d - 0.5, -d + 0.5);
    const auto mon = monitor_density_interpolation(r, vs.lrho_k, w.lo, w.hi, vs.exponent_slack, vs.ratio_cap);
    Json ratios = Json::array();
    for (const auto& rep : mon.reports) ratios.push_back(json_number(rep.ratio));
    o.body = Json{{"density_decay", vlasov::to_json(decay)},
                  {"interpolation_k", vs.lrho_k},
                  {"ratio_cap", vs.ratio_cap},
                  {"ratio_bounded", mon.bounded},
                  {"ratio_non_increasing", mon.non_increasing},
                  {"t", json_array(mon.t)},
                  {"ratio", ratios},
                  {"norm_fit", vlasov::to_json(mon.norm_fit)},
                  {"norm_exponent_bound", json_number(mon.exponent_bound)},
                  {"norm_decay_pass", mon.decay_pass}};
    o.status = status_of(decay.pass, mon.bounded && mon.decay_pass);
  } else if (name == "em") {
    const RunResult& r = shared.get();
    const auto t = r.times();
    const auto sup = column(r.records, [](const auto& x) { return x.sup_e; });
    const auto decay = check_exponent("field_sup", t, sup, alpha, w.lo, w.hi, 1.0 - d - 0.5, 1.0 - d + 0.3);
    const auto l2 = check_l2_field_decay(r.records, alpha, w.lo, w.hi);
    const auto mon = monitor_field_moment_bound(r, rc.check_moment(), vs.ratio_cap);
    o.body = Json{{"field_decay", vlasov::to_json(decay)},
                  {"l2", Json{{"fit", vlasov::to_json(l2.fit)},
                              {"exponent_bound", l2.exponent_bound},
                              {"zero_series", l2.zero_series},
                              {"m2_initial", json_number(l2.m2_initial)},
                              {"q_initial", json_number(l2.q_initial)},
                              {"m2_max", json_number(l2.m2_max)},
                              {"m2_bound", json_number(l2.m2_bound)},
                              {"pass", l2.pass}}},
                  {"moment_order", rc.check_moment()},
                  {"ratio_t", json_array(mon.t)},
                  {"ratio", json_array(mon.ratio)},
                  {"ratio_growth", json_number(mon.growth)},
                  {"ratio_cap", mon.cap},
                  {"ratio_bounded", mon.bounded}};
    o.status = status_of(decay.pass && l2.pass, mon.bounded);
  } else if (name == "le") {
    const auto suite = inverse_laplacian_suite(d, vs.le_clouds, vs.le_particles, vs.le_p, vs.le_q, rc.seed, vs.le_tolerance);
    Json spreads = Json::array();
    for (const auto& c : suite.clouds) spreads.push_back(json_number(c.spread));
    o.body = Json{{"p", vs.le_p}, {"q", json_number(vs.le_q)}, {"lambdas", json_array(std::vector<double>{0.5, 1.0, 2.0})},
                  {"tolerance", vs.le_tolerance}, {"spread", spreads}, {"max_spread", json_number(suite.max_spread)},
                  {"pass", suite.pass}};
    o.status = status_of(suite.pass);
  } else if (name == "small-data") {
    const auto rep = small_data_experiment(rc, vs.small_data_n, vs.small_data_epsilon);
    o.body = Json{{"n", rep.n},
                  {"epsilon", rep.epsilon},
                  {"max_mn", json_number(rep.max_mn)},
                  {"bound", 2.0 * rep.epsilon},
                  {"field_exponent", json_number(rep.field_exponent)},
                  {"field_constant", json_number(rep.field_constant)},
                  {"moment_derivative_ratio", json_number(rep.moment_derivative_ratio)},
                  {"completed", rep.completed},
                  {"final_time", rep.run.records.empty() ? Json(nullptr) : json_number(rep.run.records.back().t)},
                  {"pass", rep.pass}};
    o.status = status_of(rep.pass);
  } else if (name == "bootstrap") {
    const auto rep = decay_bootstrap_report(shared.get().records, alpha, d, vs.bootstrap_decades, vs.exponent_slack);
    Json windows = Json::array();
    for (const auto& f : rep.windows) windows.push_back(vlasov::to_json(f));
    o.body = Json{{"a_tilde", rep.a_tilde}, {"sharp_exponent", rep.sharp_exponent},
                  {"early_exponent", json_number(rep.early_exponent)}, {"final_exponent", json_number(rep.final_exponent)},
                  {"early_beats_threshold", rep.early_beats_threshold}, {"slack", rep.slack},
                  {"windows", windows}, {"pass", rep.pass}};
    o.status = status_of(rep.pass);
  } else if (name == "scattering") {
    const auto rep = check_scattering(shared.get(), vs.scatter_window.lo, vs.scatter_window.hi);
    o.body = Json{{"lemma_rate", vlasov::to_json(rep.lemma_rate)}, {"strong_rate", rep.strong_rate},
                  {"meets_strong_rate", rep.meets_strong_rate}, {"residual", json_array(rep.residual)},
                  {"pass", rep.lemma_rate.pass}};
    o.status = status_of(rep.lemma_rate.pass);
  } else if (name == "profiles") {
    const auto rep = check_profiles(shared.get(), w.lo, w.hi);
    const double vol = std::pow(2.0 * rep.velocity_grid.half_width / rep.velocity_grid.cells, d);
    o.body = Json{{"t", json_array(rep.t)},
                  {"field_residual", json_array(rep.field_residual)},
                  {"density_residual", json_array(rep.density_residual)},
                  {"current_residual", json_array(rep.current_residual)},
                  {"marginal_difference", json_array(rep.marginal_difference)},
                  {"velocity_softening", json_number(rep.velocity_softening)},
                  {"velocity_grid", Json{{"cells", rep.velocity_grid.cells},
                                         {"half_width", json_number(rep.velocity_grid.half_width)},
                                         {"cell_volume", json_number(vol)}}},
                  {"field_tail_decreasing", rep.field_tail_decreasing},
                  {"density_tail_decreasing", rep.density_tail_decreasing},
                  {"field_rate", vlasov::to_json(rep.field_rate)},
                  {"density_rate", vlasov::to_json(rep.density_rate)},
                  {"current_fit", vlasov::to_json(rep.current_fit)},
                  {"marginal_fit", vlasov::to_json(rep.marginal_fit)},
                  {"pass", rep.pass}};
    o.status = status_of(rep.pass);
  } else {
    throw ConfigError(0, "verify.checks", "unknown check '" + name + "'");
  }
  return o;
}

}  // namespace detail

/// Runs each check; precondition problems become a "rejected" outcome and
/// any other exception an "error" outcome. Neither aborts the other checks.
inline std::vector<CheckOutcome> run_checks(const ExperimentConfig& cfg) {
  detail::SharedRun shared(cfg.run);
  std::vector<CheckOutcome> out;
  for (const auto& name : cfg.verify.checks) {
    try {
      out.push_back(detail::run_check(name, cfg, shared));
    } catch (const PreconditionError& e) {
      out.push_back({name, CheckStatus::rejected, e.what(), Json{{"reason", e.what()}}});
    } catch (const std::exception& e) {
      out.push_back({name, CheckStatus::error, e.what(), Json{{"reason", e.what()}}});
    }
  }
  return out;
}

inline int cmd_verify(const std::string& config_path, const CommandOptions& opt = {}) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    detail::apply_overrides(cfg, opt);
  } catch (const ConfigError& e) {
    *opt.err << "error: " << e.what() << "\n";
    return 2;
  }
  if (cfg.verify.checks.empty()) {
    *opt.err << "error: no checks selected ([verify] checks or --checks)\n";
    return 2;
  }
  const auto dir = resolve_output_dir(cfg, opt);
  const std::string text = to_text(cfg);
  std::filesystem::create_directories(dir);
  const auto outcomes = run_checks(cfg);
  Json summary = Json::array();
  int status = 0;
  for (const auto& o : outcomes) {
    Json body = o.body;
    body["status"] = to_string(o.status);
    if (!o.message.empty()) body["message"] = o.message;
    write_json(dir / (o.name + ".json"), envelope("check:" + o.name, body, text));
    summary.push_back(Json{{"check", o.name}, {"status", to_string(o.status)}});
    *opt.log << o.name << ": " << to_string(o.status);
    if (!o.message.empty()) *opt.log << " (" << o.message << ")";
    *opt.log << "\n";
    if (o.status == CheckStatus::warn) *opt.err << "warning: " << o.name << ": monitored ratio out of range\n";
    if (o.gates()) status = 1;
  }
  write_json(dir / "verify.json", envelope("verify", Json{{"checks", summary}, {"exit_status", status}}, text));
  return status;
}

// ---------------------------------------------------------------------------
// fit / plot

/// alpha is read from the config embedded in the CSV unless given.
inline double series_alpha(const SeriesTable& table, std::optional<double> alpha) {
  if (alpha) return *alpha;
  if (table.config_text.empty()) return 0.0;
  return parse_config(table.config_text).run.alpha;
}

inline int cmd_fit(const std::string& csv_path, const std::string& column_name, Window window,
                   const std::optional<std::string>& json_out, std::optional<double> alpha = std::nullopt,
                   const CommandOptions& opt = {}) {
  try {
    const SeriesTable table = read_series_csv(csv_path);
    const double a = series_alpha(table, alpha);
    const auto& t = table.column("t");
    const auto& v = table.column(column_name);
    RateFit fit;
    try {
      fit = fit_rate(t, v, a, window.lo, window.hi);
    } catch (const FitError& e) {
      std::size_t row = 0;
      while (row < t.size() && t[row] != e.offending_time) ++row;
      *opt.err << "error: column '" << column_name << "' has a nonpositive value in the window at row " << row + 1
               << " (line " << (row < t.size() ? table.row_lines[row] : 0) << ", t = "
               << detail::fmt_double(e.offending_time) << ")\n";
      return 2;
    }
    *opt.log << "exponent " << detail::fmt_double(fit.exponent) << "\nintercept " << detail::fmt_double(fit.log_intercept)
             << "\nr_squared " << detail::fmt_double(fit.r_squared) << "\nsamples " << fit.samples << "\n";
    if (json_out) {
      Json body = to_json(fit);
      body["column"] = column_name;
      body["alpha"] = a;
      body["source"] = std::filesystem::path(csv_path).filename().string();
      write_json(*json_out, envelope("fit", body, table.config_text));
    }
    return 0;
  } catch (const std::exception& e) {
    *opt.err << "error: " << e.what() << "\n";
    return 2;
  }
}

/// One SVG per column, named <column>.svg in `out_dir`.
inline int cmd_plot(const std::string& csv_path, const std::vector<std::string>& columns, const std::string& out_dir,
                    const std::vector<double>& guides, std::optional<double> alpha = std::nullopt,
                    const CommandOptions& opt = {}) {
  try {
    if (columns.empty()) throw DomainError("plot: empty selection");
    const SeriesTable table = read_series_csv(csv_path);
    const double a = series_alpha(table, alpha);
    std::vector<double> x = table.column("t");
    for (double& s : x) s += a;
    std::filesystem::create_directories(out_dir);
    for (const auto& c : columns) {
      PlotOptions po;
      po.title = c;
      po.guide_slopes = guides;
      const std::string svg = render_loglog_svg({PlotSeries{c, x, table.column(c)}}, po);
      const auto path = std::filesystem::path(out_dir) / (c + ".svg");
      std::ofstream(path) << svg;
      *opt.log << "plot: " << path.string() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    *opt.err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace vlasov
