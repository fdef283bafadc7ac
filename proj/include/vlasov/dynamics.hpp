#pragma once

// Integration of the characteristic system  x' = v,  v' = E(t, x)  for the
// whole ensemble with kick-drift-kick leapfrog, plus the free-transport
// (translated) coordinates y = x - (t + alpha) v.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "field.hpp"

namespace vlasov {

/// Raised when a step produces a non-finite coordinate.
class BlowUpError : public std::runtime_error {
 public:
  explicit BlowUpError(const std::string& what) : std::runtime_error(what) {}
};

struct ForceModel {
  bool enabled = true;
  Softening softening;
};

enum class CadenceMode { every, geometric };

/// Step-size and record schedule.
///
/// dt_{k+1} = min(growth * dt_k, dt_max, dt_rel_max * (t + alpha)); growth 1
/// and dt_rel_max 0 give fixed steps. Records are emitted every
/// `every_steps` steps, or at the geometric times t with
/// (t + alpha) = (t_end + alpha) 10^{-k/per_decade}, plus t = 0 and t_end.
struct TimeSchedule {
  double dt0 = 1e-2;
  double growth = 1.0;
  double dt_max = 1.0;
  double dt_rel_max = 0.0;  ///< fraction of (t + alpha); 0 disables
  double t_end = 1.0;
  CadenceMode cadence = CadenceMode::every;
  int every_steps = 1;
  double per_decade = 10.0;

  bool fixed_step() const { return growth == 1.0 && dt_rel_max == 0.0 && dt0 <= dt_max; }

  void validate() const {
    if (!(dt0 > 0.0)) throw DomainError("schedule: dt0 must be positive");
    if (!(growth >= 1.0)) throw DomainError("schedule: growth factor must be >= 1");
    if (!(dt_max > 0.0)) throw DomainError("schedule: dt_max must be positive");
    if (!(dt_rel_max >= 0.0)) throw DomainError("schedule: dt_rel_max must be >= 0");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("schedule: t_end must be finite and >= 0");
    if (cadence == CadenceMode::every && every_steps < 1) throw DomainError("schedule: every_steps must be >= 1");
    if (cadence == CadenceMode::geometric && !(per_decade > 0.0))
      throw DomainError("schedule: per_decade must be positive");
  }

  /// Next nominal step after a nominal step `prev` (0 for the first step).
  double next_step(double prev, double t, double alpha) const {
    double dt = prev == 0.0 ? dt0 : prev * growth;
    dt = std::min(dt, dt_max);
    if (dt_rel_max > 0.0) dt = std::min(dt, dt_rel_max * (t + alpha));
    return dt;
  }

  /// Increasing geometric record times in (0, t_end], t_end included. Empty
  /// in `every` mode.
  std::vector<double> record_times(double alpha) const {
    std::vector<double> out;
    if (cadence != CadenceMode::geometric || t_end == 0.0) return out;
    const double top = t_end + alpha;
    const double floor_t = alpha > 0.0 ? 0.0 : 1e-6 * t_end;
    for (int k = 0;; ++k) {
      const double t = top * std::pow(10.0, -k / per_decade) - alpha;
      if (t <= floor_t || k > 1000) break;
      out.push_back(k == 0 ? t_end : t);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }
};

/// Ensemble plus the field at the current positions.
struct TrajectoryState {
  Ensemble ensemble;
  std::size_t steps = 0;
  std::vector<double> accelerations;  ///< flat n*d, E at current positions

  static TrajectoryState start(Ensemble ens, const ForceModel& force) {
    TrajectoryState s;
    s.accelerations = force.enabled ? self_consistent_accelerations(ens, force.softening)
                                    : std::vector<double>(ens.size() * ens.dim(), 0.0);
    s.ensemble = std::move(ens);
    return s;
  }
};

/// One kick-drift-kick step. Negative dt integrates backwards.
///
/// The step is carried out on (y, v) with y = x - (t+alpha) v: a kick
/// v += h E changes y by -(t+alpha) h E, the drift only advances the clock.
/// In exact arithmetic this is the usual leapfrog on (x, v).
inline TrajectoryState step_leapfrog(TrajectoryState state, double dt, const ForceModel& force) {
  if (!(dt != 0.0) || !std::isfinite(dt)) throw DomainError("step_leapfrog: dt must be finite and nonzero");
  auto& ens = state.ensemble;
  auto x = ens.mutable_positions();
  auto v = ens.mutable_velocities();
  auto y = ens.mutable_translated();
  const std::size_t n = x.size();
  if (state.accelerations.size() != n) throw DomainError("step_leapfrog: cached accelerations are stale");
  const double half = 0.5 * dt;
  auto kick = [&](double s) {
    for (std::size_t k = 0; k < n; ++k) {
      const double dv = half * state.accelerations[k];
      v[k] += dv;
      y[k] -= s * dv;
    }
  };
  if (force.enabled) kick(ens.shifted_time());
  const double t_new = ens.time() + dt;
  if (!(t_new >= 0.0)) throw DomainError("step_leapfrog: step would move before t = 0");
  ens.set_time(t_new);
  if (force.enabled) {
    state.accelerations = self_consistent_accelerations(ens, force.softening);
    kick(ens.shifted_time());
  }
  ++state.steps;
  if (!ens.all_finite())
    throw BlowUpError("non-finite coordinate after step " + std::to_string(state.steps) + " at t = " +
                      std::to_string(ens.time()));
  return state;
}

/// y_i = x_i - (t + alpha) v_i, flat n*d.
inline std::vector<double> translated_positions(const Ensemble& ens) {
  const auto y = ens.translated();
  return {y.begin(), y.end()};
}

/// R(t) = max_i |y_i|.
inline double max_translated_radius(const Ensemble& ens) {
  double best = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) best = std::max(best, translated_radius(ens, i));
  return best;
}

}  // namespace vlasov
