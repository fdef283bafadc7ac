#pragma once

// Measured stand-ins for the macroscopic quantities of the kinetic system:
// cloud-in-cell densities, the velocity marginal, self-similar profile
// residuals, scattering residuals and power-law rate fits.
//
// Grids are cubes of `cells` per axis with cell-centred values. Deposition is
// multilinear: a charge at cell coordinate u spreads over the 2^d nearest
// cell centres with tensor-product hat weights. Portions landing outside the
// cube are counted as escaped, so deposited + escaped equals the charge up
// to rounding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "field.hpp"

namespace vlasov {

struct GridSpec {
  int cells = 12;            ///< per axis
  double half_width = 1.0;   ///< cube is center +- half_width
  std::vector<double> center;  ///< empty means origin
};

struct DepositGrid {
  int dim = 0;
  int cells = 0;
  int components = 1;
  std::vector<double> lo;
  double width = 0.0;  ///< cell edge length
  double cell_volume = 0.0;
  std::vector<double> values;  ///< cell-major, component fastest; density units
  double deposited = 0.0;      ///< charge (or first-moment) landing on the grid
  double escaped = 0.0;        ///< charge outside the grid
  double total = 0.0;          ///< deposited + escaped as accumulated

  std::size_t cell_count() const { return values.size() / components; }

  double escaped_fraction() const { return total > 0.0 ? escaped / total : 0.0; }

  /// Euclidean norm of the cell value (absolute value for scalar grids).
  double cell_magnitude(std::size_t c) const {
    double s = 0.0;
    for (int k = 0; k < components; ++k) s += values[c * components + k] * values[c * components + k];
    return std::sqrt(s);
  }

  double sup() const {
    double best = 0.0;
    for (std::size_t c = 0; c < cell_count(); ++c) best = std::max(best, cell_magnitude(c));
    return best;
  }

  /// (sum_c |value|^p * cell_volume)^{1/p}; p = inf gives sup().
  double lp_norm(double p) const {
    if (std::isinf(p)) return sup();
    if (!(p >= 1.0)) throw DomainError("lp_norm: p must be >= 1");
    double s = 0.0;
    for (std::size_t c = 0; c < cell_count(); ++c) s += std::pow(cell_magnitude(c), p);
    return std::pow(s * cell_volume, 1.0 / p);
  }

  /// Sum of scalar values times cell volume.
  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * cell_volume;
  }

  std::vector<double> cell_center(std::size_t c) const {
    std::vector<double> p(dim);
    for (int a = 0; a < dim; ++a) {
      p[a] = lo[a] + width * (static_cast<double>(c % cells) + 0.5);
      c /= cells;
    }
    return p;
  }
};

namespace detail {

inline DepositGrid empty_grid(int d, const GridSpec& spec, int components) {
  if (spec.cells < 1) throw DomainError("grid: need at least one cell per axis");
  if (!(spec.half_width > 0.0) || !std::isfinite(spec.half_width)) throw DomainError("grid: half width must be positive");
  if (!spec.center.empty() && spec.center.size() != static_cast<std::size_t>(d))
    throw DomainError("grid: center has wrong dimension");
  DepositGrid g;
  g.dim = d;
  g.cells = spec.cells;
  g.components = components;
  g.width = 2.0 * spec.half_width / spec.cells;
  g.cell_volume = std::pow(g.width, d);
  g.lo.resize(d);
  for (int a = 0; a < d; ++a) g.lo[a] = (spec.center.empty() ? 0.0 : spec.center[a]) - spec.half_width;
  std::size_t count = 1;
  for (int a = 0; a < d; ++a) count *= static_cast<std::size_t>(spec.cells);
  g.values.assign(count * components, 0.0);
  return g;
}

/// Multilinear deposition of `charges` (n x components) located at
/// coords * scale (coords flat n x d).
inline void cic_deposit(DepositGrid& g, std::span<const double> coords, double scale,
                        std::span<const double> charges, std::span<const double> mass) {
  const int d = g.dim;
  const int nc = g.components;
  const std::size_t n = mass.size();
  std::vector<long> base(d);
  std::vector<double> frac(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) {
      const double u = (coords[i * d + a] * scale - g.lo[a]) / g.width - 0.5;
      const double f = std::floor(u);
      base[a] = static_cast<long>(f);
      frac[a] = u - f;
    }
    double landed = 0.0, lost = 0.0;
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
      double wgt = 1.0;
      std::size_t flat = 0, stride = 1;
      bool inside = true;
      for (int a = 0; a < d; ++a) {
        const bool up = (corner >> a) & 1u;
        const long idx = base[a] + (up ? 1 : 0);
        wgt *= up ? frac[a] : 1.0 - frac[a];
        if (idx < 0 || idx >= g.cells) inside = false;
        flat += static_cast<std::size_t>(inside ? idx : 0) * stride;
        stride *= static_cast<std::size_t>(g.cells);
      }
      if (wgt == 0.0) continue;
      if (!inside) {
        lost += wgt;
        continue;
      }
      landed += wgt;
      for (int k = 0; k < nc; ++k) g.values[flat * nc + k] += wgt * charges[i * nc + k];
    }
    g.deposited += landed * mass[i];
    g.escaped += lost * mass[i];
    g.total += mass[i];
  }
  const double inv = 1.0 / g.cell_volume;
  for (double& v : g.values) v *= inv;
}

inline void check_escape(const DepositGrid& g, double max_escape) {
  if (g.escaped_fraction() > max_escape)
    throw DomainError("deposition: " + std::to_string(100.0 * g.escaped_fraction()) +
                      "% of the charge lies outside the grid");
}

}  // namespace detail

/// Cube of half width radius_factor * (t + alpha) centred at the origin.
inline GridSpec self_similar_grid(const Ensemble& ens, double radius_factor, int cells) {
  return GridSpec{cells, radius_factor * ens.shifted_time(), {}};
}

inline DepositGrid deposit_density(const Ensemble& ens, const GridSpec& spec, double max_escape = 0.5) {
  DepositGrid g = detail::empty_grid(ens.dim(), spec, 1);
  detail::cic_deposit(g, ens.positions(), 1.0, ens.weights(), ens.weights());
  detail::check_escape(g, max_escape);
  return g;
}

/// j = sum_i w_i v_i delta(x - x_i), deposited per component.
inline DepositGrid current_density(const Ensemble& ens, const GridSpec& spec, double max_escape = 0.5) {
  const int d = ens.dim();
  DepositGrid g = detail::empty_grid(d, spec, d);
  std::vector<double> q(ens.size() * d);
  for (std::size_t i = 0; i < ens.size(); ++i)
    for (int a = 0; a < d; ++a) q[i * d + a] = ens.weight(i) * ens.velocity(i)[a];
  detail::cic_deposit(g, ens.positions(), 1.0, q, ens.weights());
  detail::check_escape(g, max_escape);
  return g;
}

/// Velocity-space cube, centred at the origin, whose interior (one cell in
/// from each face) holds every velocity of every given ensemble, so that
/// multilinear deposition loses no charge.
inline GridSpec auto_velocity_grid(std::span<const Ensemble> ensembles, int cells) {
  if (cells < 3) throw DomainError("velocity grid: need at least 3 cells per axis");
  double vmax = 0.0;
  for (const auto& e : ensembles)
    for (double a : e.velocities()) vmax = std::max(vmax, std::abs(a));
  if (vmax == 0.0) vmax = 1.0;
  const double half = vmax * cells / (cells - 2.0) * (1.0 + 1e-9);
  return GridSpec{cells, half, {}};
}

/// F(t, v) = integral of f over x: weights deposited at the velocities.
inline DepositGrid velocity_marginal(const Ensemble& ens, const GridSpec& spec) {
  DepositGrid g = detail::empty_grid(ens.dim(), spec, 1);
  detail::cic_deposit(g, ens.velocities(), 1.0, ens.weights(), ens.weights());
  return g;
}

inline DepositGrid velocity_marginal(const Ensemble& ens, int cells) {
  return velocity_marginal(ens, auto_velocity_grid(std::span<const Ensemble>(&ens, 1), cells));
}

/// Frozen late-time state standing in for F_inf (its velocities and weights).
struct LimitingProfiles {
  Ensemble reference;
  double velocity_softening = 0.1;
};

/// E_inf(v) = (1/(d w_d)) sum_j w_j (v - v_j)/(|v - v_j|^2 + eps_v^2)^{d/2},
/// flat output of length points.size().
inline std::vector<double> limiting_field(const LimitingProfiles& prof, std::span<const double> v_points) {
  if (!(prof.velocity_softening > 0.0)) throw DomainError("limiting_field: velocity softening must be positive");
  std::vector<double> out;
  detail::evaluate(prof.reference.velocities(), prof.reference.weights(), prof.reference.dim(), v_points,
                   prof.velocity_softening, false, out, nullptr);
  return out;
}

/// Probe set in the profile variable u = x/(t+alpha).
struct ProfileProbe {
  int grid_points = 9;        ///< per axis
  double radius_factor = 3.0;  ///< |u| <= radius_factor
};

namespace detail {
inline std::vector<double> scaled_positions(const Ensemble& ens) {
  const double inv = 1.0 / ens.shifted_time();
  std::vector<double> u(ens.positions().begin(), ens.positions().end());
  for (double& a : u) a *= inv;
  return u;
}
}  // namespace detail

/// max_u |(t+alpha)^{d-1} E(t, (t+alpha)u) - E_inf(u)| over the probe ball.
///
/// The left field is taken with softening eps_v (t+alpha), the same
/// smoothing as E_inf once expressed in the profile variable; it then equals
/// the softened field of the rescaled cloud x_j/(t+alpha).
inline double profile_residual_field(const Ensemble& ens, const LimitingProfiles& prof, const ProfileProbe& probe) {
  const int d = ens.dim();
  if (prof.reference.dim() != d || prof.reference.size() != ens.size())
    throw DomainError("profile residual: reference ensemble does not match");
  const auto u = ball_grid(d, probe.grid_points, probe.radius_factor);
  const auto scaled = detail::scaled_positions(ens);
  std::vector<double> left;
  detail::evaluate(scaled, ens.weights(), d, u, prof.velocity_softening, false, left, nullptr);
  const auto right = limiting_field(prof, u);
  double best = 0.0;
  for (std::size_t i = 0; i < u.size() / d; ++i) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += (left[i * d + a] - right[i * d + a]) * (left[i * d + a] - right[i * d + a]);
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

/// max over cells of |(t+alpha)^d rho(t, (t+alpha)u) - F_inf(u)| on the
/// velocity grid `grid`; both sides use the same deposition.
inline double profile_residual_density(const Ensemble& ens, const LimitingProfiles& prof, const GridSpec& grid) {
  const int d = ens.dim();
  DepositGrid left = detail::empty_grid(d, grid, 1);
  detail::cic_deposit(left, ens.positions(), 1.0 / ens.shifted_time(), ens.weights(), ens.weights());
  const DepositGrid right = velocity_marginal(prof.reference, grid);
  double best = 0.0;
  for (std::size_t c = 0; c < left.values.size(); ++c) best = std::max(best, std::abs(left.values[c] - right.values[c]));
  return best;
}

/// max over cells with centre |u| <= 1 of |(t+alpha)^d j(t,(t+alpha)u) - u F_inf(u)|.
///
/// u F_inf(u) is represented by the empirical measure sum_j w_j v_j delta(u - v_j)
/// of the reference state, deposited like the left side.
inline double profile_residual_current(const Ensemble& ens, const LimitingProfiles& prof, const GridSpec& grid) {
  const int d = ens.dim();
  auto first_moment = [d](const Ensemble& e) {
    std::vector<double> q(e.size() * d);
    for (std::size_t i = 0; i < e.size(); ++i)
      for (int a = 0; a < d; ++a) q[i * d + a] = e.weight(i) * e.velocity(i)[a];
    return q;
  };
  DepositGrid left = detail::empty_grid(d, grid, d);
  detail::cic_deposit(left, ens.positions(), 1.0 / ens.shifted_time(), first_moment(ens), ens.weights());
  DepositGrid right = detail::empty_grid(d, grid, d);
  detail::cic_deposit(right, prof.reference.velocities(), 1.0, first_moment(prof.reference), prof.reference.weights());
  double best = 0.0;
  for (std::size_t c = 0; c < left.cell_count(); ++c) {
    const auto u = left.cell_center(c);
    double u2 = 0.0;
    for (double a : u) u2 += a * a;
    if (u2 > 1.0) continue;
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      const double diff = left.values[c * d + a] - right.values[c * d + a];
      s += diff * diff;
    }
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

/// max over cells of |F(t) - F_inf| on a common velocity grid.
inline double velocity_marginal_difference(const Ensemble& ens, const LimitingProfiles& prof, const GridSpec& grid) {
  const DepositGrid a = velocity_marginal(ens, grid);
  const DepositGrid b = velocity_marginal(prof.reference, grid);
  double best = 0.0;
  for (std::size_t c = 0; c < a.values.size(); ++c) best = std::max(best, std::abs(a.values[c] - b.values[c]));
  return best;
}

/// r(t_k) = max_i |y_i(t_k) - y_i(t_last)| for a series of flat translated
/// position arrays (all of the same length).
inline std::vector<double> scattering_residual(std::span<const std::vector<double>> translated, int d) {
  if (translated.size() < 2) throw DomainError("scattering_residual: need at least two recorded times");
  const auto& last = translated.back();
  std::vector<double> out;
  out.reserve(translated.size());
  for (const auto& y : translated) {
    if (y.size() != last.size()) throw DomainError("scattering_residual: particle count changed");
    double best = 0.0;
    for (std::size_t i = 0; i < y.size() / d; ++i) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) {
        const double diff = y[i * d + a] - last[i * d + a];
        s += diff * diff;
      }
      best = std::max(best, std::sqrt(s));
    }
    out.push_back(best);
  }
  return out;
}

struct RateFit {
  double exponent = 0.0;
  double log_intercept = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  double r_squared = 1.0;
  std::size_t samples = 0;
};

class FitError : public DomainError {
 public:
  FitError(const std::string& what, double t) : DomainError(what), offending_time(t) {}
  double offending_time;
};

/// Least-squares slope of log(value) against log(t + alpha) over the samples
/// with t in [t_lo, t_hi].
inline RateFit fit_rate(std::span<const double> t, std::span<const double> value, double alpha, double t_lo,
                        double t_hi) {
  if (t.size() != value.size()) throw DomainError("fit_rate: series lengths differ");
  std::vector<double> lx, ly;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_lo || t[k] > t_hi) continue;
    if (!(value[k] > 0.0) || !std::isfinite(value[k]))
      throw FitError("fit_rate: nonpositive value " + std::to_string(value[k]) + " at t = " + std::to_string(t[k]), t[k]);
    if (!(t[k] + alpha > 0.0)) throw FitError("fit_rate: t + alpha must be positive", t[k]);
    lx.push_back(std::log(t[k] + alpha));
    ly.push_back(std::log(value[k]));
    lo = std::min(lo, t[k]);
    hi = std::max(hi, t[k]);
  }
  if (lx.size() < 5) throw DomainError("fit_rate: need at least 5 samples in the window, got " + std::to_string(lx.size()));
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_rate: window spans a single time");
  RateFit fit;
  fit.exponent = sxy / sxx;
  fit.log_intercept = my - fit.exponent * mx;
  fit.t_lo = lo;
  fit.t_hi = hi;
  fit.samples = lx.size();
  double sse = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    const double r = ly[k] - (fit.log_intercept + fit.exponent * lx[k]);
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace vlasov
