#pragma once

// One trajectory: sample the initial cloud, integrate under a schedule and
// record the measured functionals at every cadence point.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "diagnostics.hpp"
#include "dynamics.hpp"
#include "field.hpp"
#include "sampling.hpp"

namespace vlasov {

/// Full description of an experiment.
struct RunConfig {
  int dimension = 4;
  double alpha = 1.0;
  SamplerSpec sampler;  ///< dim and alpha are taken from the fields above
  std::uint64_t seed = 1;

  bool field_enabled = true;
  std::optional<double> softening;  ///< absolute epsilon; empty means auto
  double softening_factor = 0.5;    ///< auto: factor * mean nearest-neighbour distance at t = 0

  TimeSchedule schedule;
  ProbeSpec probe;

  int grid_cells = 12;              ///< spatial deposition grid per axis
  double grid_radius_factor = 3.0;  ///< spatial grid half width / (t + alpha)
  double lp_exponent = 1.5;         ///< p for L^p density norms in reports

  double moment_n = 0.0;  ///< check moment order; 0 means d(d-1)+1

  int velocity_cells = 12;
  double velocity_softening = 0.0;  ///< 0 means one velocity-grid cell width
  ProfileProbe profile_probe;

  std::string output_dir;  ///< empty: $VPSIM_OUTPUT_ROOT or ./vpsim-out

  double check_moment() const { return moment_n > 0.0 ? moment_n : dimension * (dimension - 1.0) + 1.0; }

  SamplerSpec effective_sampler() const {
    SamplerSpec s = sampler;
    s.dim = dimension;
    s.alpha = alpha;
    s.required_moment = check_moment();
    return s;
  }
};

/// One time slice of the measured functionals.
struct DiagnosticsRecord {
  double t = 0.0;
  double m0 = 0.0;
  double m2 = 0.0;
  double mn = 0.0;
  double sup_e = 0.0;    ///< max |E| over the probe set
  double pe = 0.0;       ///< pairwise analogue of ||E||_2^2
  double ke = 0.0;
  double r_max = 0.0;    ///< max_i |x_i - (t+alpha) v_i|
  double rho_sup = 0.0;  ///< max cell density on the self-similar grid
  double escaped_frac = 0.0;
  double scatter_resid = 0.0;  ///< max_i |y_i(t) - y_i(t_end)|, filled after the run
};

struct RunResult {
  RunConfig config;
  double softening = 0.0;
  std::size_t steps = 0;
  std::vector<DiagnosticsRecord> records;
  std::vector<Ensemble> snapshots;  ///< one per record

  std::vector<double> times() const {
    std::vector<double> t;
    for (const auto& r : records) t.push_back(r.t);
    return t;
  }
};

/// Carries the records gathered before a step failed.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, RunResult partial)
      : std::runtime_error(what), partial_result(std::move(partial)) {}
  RunResult partial_result;
};

/// Softening for sup|E|: epsilon at t = 0, then growing like t + alpha so the
/// kernel width follows the interparticle spacing of the dispersing cloud.
inline Softening diagnostic_softening(const Ensemble& ens, double epsilon) {
  return Softening{epsilon * std::max(1.0, ens.shifted_time()) / std::max(1.0, ens.alpha())};
}

inline DiagnosticsRecord measure(const Ensemble& ens, const RunConfig& cfg, const Softening& soft) {
  DiagnosticsRecord r;
  r.t = ens.time();
  r.m0 = transported_moment(ens, 0.0);
  r.m2 = transported_moment(ens, 2.0);
  r.mn = transported_moment(ens, cfg.check_moment());
  // With the field switched off the model field is identically zero.
  if (cfg.field_enabled) {
    r.sup_e = sup_field_estimate(ens, diagnostic_softening(ens, soft.epsilon), cfg.probe);
    r.pe = ens.dim() > 2 ? potential_energy(ens, soft) : 0.0;
  }
  r.ke = kinetic_energy(ens);
  r.r_max = max_translated_radius(ens);
  const double s = ens.shifted_time() > 0.0 ? ens.shifted_time() : 1.0;
  const auto grid = deposit_density(ens, GridSpec{cfg.grid_cells, cfg.grid_radius_factor * s, {}}, 1.0);
  r.rho_sup = grid.sup();
  r.escaped_frac = grid.escaped_fraction();
  return r;
}

inline void fill_scattering_residual(RunResult& result) {
  if (result.snapshots.size() < 2) return;
  std::vector<std::vector<double>> y;
  y.reserve(result.snapshots.size());
  for (const auto& e : result.snapshots) y.push_back(translated_positions(e));
  const auto r = scattering_residual(y, result.config.dimension);
  for (std::size_t k = 0; k < r.size(); ++k) result.records[k].scatter_resid = r[k];
}

inline double resolve_softening(const RunConfig& cfg, const Ensemble& initial) {
  if (cfg.softening) return *cfg.softening;
  const double eps = auto_softening(initial, cfg.softening_factor);
  return eps > 0.0 ? eps : cfg.softening_factor;
}

using RecordCallback = std::function<void(const DiagnosticsRecord&, const Ensemble&)>;

/// Integrates with an explicit initial ensemble (used by experiments that
/// rescale the sampled data first).
inline RunResult run_from(const RunConfig& cfg, Ensemble initial, const RecordCallback& on_record = {}) {
  cfg.schedule.validate();
  RunResult result;
  result.config = cfg;
  result.softening = resolve_softening(cfg, initial);
  const ForceModel force{cfg.field_enabled, Softening{result.softening}};
  const Softening soft{result.softening};
  const double alpha = initial.alpha();

  auto emit = [&](const Ensemble& ens) {
    result.records.push_back(measure(ens, cfg, soft));
    result.snapshots.push_back(ens);
    if (on_record) on_record(result.records.back(), ens);
  };

  TrajectoryState state = TrajectoryState::start(std::move(initial), force);
  emit(state.ensemble);

  const TimeSchedule& sched = cfg.schedule;
  const auto targets = sched.record_times(alpha);
  std::size_t next_target = 0;
  double nominal = 0.0;
  std::size_t completed = 0;
  try {
    while (state.ensemble.time() < sched.t_end) {
      const double t = state.ensemble.time();
      const bool geometric = sched.cadence == CadenceMode::geometric;
      while (geometric && next_target < targets.size() && targets[next_target] <= t) ++next_target;
      const double target = geometric && next_target < targets.size() ? targets[next_target] : sched.t_end;
      nominal = sched.next_step(nominal, t, alpha);
      double dt = nominal;
      bool lands = false;
      if (t + dt >= target - 1e-9 * dt) {
        dt = target - t;
        lands = true;
      }
      state = step_leapfrog(std::move(state), dt, force);
      completed = state.steps;
      if (lands) state.ensemble.set_time(target);
      const bool at_end = state.ensemble.time() >= sched.t_end;
      const bool record = geometric ? lands : (state.steps % sched.every_steps == 0 || at_end);
      if (record) emit(state.ensemble);
    }
  } catch (const std::exception& e) {
    result.steps = completed;
    fill_scattering_residual(result);
    throw RunAborted(e.what(), std::move(result));
  }
  result.steps = state.steps;
  fill_scattering_residual(result);
  return result;
}

inline RunResult run(const RunConfig& cfg, const RecordCallback& on_record = {}) {
  return run_from(cfg, sample_initial(cfg.effective_sampler(), cfg.seed), on_record);
}

}  // namespace vlasov
