#pragma once

// Direct-summation Riesz field of a weighted point cloud,
//
//   E(p) = (1/(d w_d)) sum_j w_j (p - x_j) / (|p - x_j|^2 + eps^2)^{d/2},
//
// its analytic gradient, and the pairwise electrostatic energy
//
//   PE = (1/(d(d-2) w_d)) sum_{i != j} w_i w_j (r_ij^2 + eps^2)^{(2-d)/2},
//
// which is the particle analogue of the squared L^2 norm of E (the diagonal
// i = j is dropped). Each evaluation point sums its sources sequentially in
// index order; points are distributed over threads.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "core.hpp"
#include "parallel.hpp"

namespace vlasov {

struct Softening {
  double epsilon = 0.0;
};

struct FieldSample {
  std::vector<double> point;
  std::vector<double> field;
  std::optional<std::vector<double>> gradient;  ///< d x d, row-major: dE_a/dp_b
};

class SingularEvaluation : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Points at which the sup-norm of E (or of its gradient) is estimated:
/// particle positions and/or a regular grid restricted to the ball of
/// radius radius_factor * (t + alpha).
struct ProbeSpec {
  bool include_particles = true;
  int grid_points = 9;  ///< per axis; 0 disables the grid
  double radius_factor = 3.0;
};

namespace detail {

template <class Fn>
decltype(auto) dispatch_dim(int d, Fn&& fn) {
  switch (d) {
    case 2: return fn(std::integral_constant<int, 2>{});
    case 3: return fn(std::integral_constant<int, 3>{});
    case 4: return fn(std::integral_constant<int, 4>{});
    case 5: return fn(std::integral_constant<int, 5>{});
    case 6: return fn(std::integral_constant<int, 6>{});
    default: return fn(std::integral_constant<int, 0>{});
  }
}

inline double int_pow(double base, int e) {
  double r = 1.0;
  for (; e > 0; --e) r *= base;
  return r;
}

constexpr int max_dim = 16;

/// r2e^{-d/2}. D is the compile-time dimension or 0 for runtime `d`.
template <int D>
inline double inv_half_power(double r2e, int d) {
  const int dd = D ? D : d;
  if (dd % 2 == 0) return int_pow(1.0 / r2e, dd / 2);
  return int_pow(1.0 / std::sqrt(r2e), dd);
}

/// Adds the kernel sum at `p` into `out` (length d); the source `skip` is
/// omitted. Optionally accumulates the d x d gradient.
template <int D>
inline void accumulate(std::span<const double> src, std::span<const double> w, int d, const double* p,
                       double eps2, std::size_t skip, double* out, double* grad) {
  const int dd = D ? D : d;
  const std::size_t n = w.size();
  double e[max_dim] = {};
  double diff[max_dim];
  for (std::size_t j = 0; j < n; ++j) {
    if (j == skip) continue;
    const double* xj = src.data() + j * dd;
    double r2 = 0.0;
    for (int a = 0; a < dd; ++a) {
      diff[a] = p[a] - xj[a];
      r2 += diff[a] * diff[a];
    }
    const double r2e = r2 + eps2;
    if (r2e == 0.0) throw SingularEvaluation("field evaluated at a source with zero softening");
    const double k = w[j] * inv_half_power<D>(r2e, dd);
    for (int a = 0; a < dd; ++a) e[a] += k * diff[a];
    if (grad) {
      const double k2 = dd * k / r2e;
      for (int a = 0; a < dd; ++a) {
        grad[a * dd + a] += k;
        for (int b = 0; b < dd; ++b) grad[a * dd + b] -= k2 * diff[a] * diff[b];
      }
    }
  }
  for (int a = 0; a < dd; ++a) out[a] += e[a];
}

constexpr std::size_t no_skip = std::numeric_limits<std::size_t>::max();

/// Field (and optionally gradient) of `sources` at flat `points`; when
/// `exclude_self` the i-th point skips the i-th source.
inline void evaluate(std::span<const double> sources, std::span<const double> weights, int d,
                     std::span<const double> points, double epsilon, bool exclude_self,
                     std::vector<double>& field, std::vector<double>* gradient) {
  if (d > max_dim) throw DomainError("field evaluation supports d <= 16");
  const DimensionConstants c = DimensionConstants::of(d);
  const std::size_t m = points.size() / d;
  field.assign(m * d, 0.0);
  if (gradient) gradient->assign(m * d * d, 0.0);
  const double eps2 = epsilon * epsilon;
  dispatch_dim(d, [&](auto dim_tag) {
    constexpr int D = decltype(dim_tag)::value;
    parallel_for(m, [&](std::size_t i) {
      double* out = field.data() + i * d;
      double* g = gradient ? gradient->data() + i * d * d : nullptr;
      accumulate<D>(sources, weights, d, points.data() + i * d, eps2, exclude_self ? i : no_skip, out, g);
      for (int a = 0; a < d; ++a) out[a] *= c.field_coefficient;
      if (g)
        for (int a = 0; a < d * d; ++a) g[a] *= c.field_coefficient;
    });
  });
}

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

/// Max absolute row sum of a d x d row-major matrix.
inline double max_row_sum(const double* m, int d) {
  double best = 0.0;
  for (int a = 0; a < d; ++a) {
    double row = 0.0;
    for (int b = 0; b < d; ++b) row += std::abs(m[a * d + b]);
    best = std::max(best, row);
  }
  return best;
}

inline void check_softening(const Softening& soft) {
  if (!(soft.epsilon >= 0.0) || !std::isfinite(soft.epsilon)) throw DomainError("softening must be finite and >= 0");
}

}  // namespace detail

inline std::vector<FieldSample> field_at_points(const Ensemble& ens, std::span<const double> points,
                                                const Softening& soft, bool with_gradient = false) {
  detail::check_softening(soft);
  const int d = ens.dim();
  if (points.size() % d != 0) throw DomainError("field_at_points: point array length is not a multiple of d");
  std::vector<double> field, grad;
  detail::evaluate(ens.positions(), ens.weights(), d, points, soft.epsilon, false, field,
                   with_gradient ? &grad : nullptr);
  const std::size_t m = points.size() / d;
  std::vector<FieldSample> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    out[i].point.assign(points.begin() + i * d, points.begin() + (i + 1) * d);
    out[i].field.assign(field.begin() + i * d, field.begin() + (i + 1) * d);
    if (with_gradient) out[i].gradient.emplace(grad.begin() + i * d * d, grad.begin() + (i + 1) * d * d);
  }
  return out;
}

/// Field at each particle from all other particles, flat n*d. This is the
/// acceleration of the characteristic system.
inline std::vector<double> self_consistent_accelerations(const Ensemble& ens, const Softening& soft) {
  detail::check_softening(soft);
  std::vector<double> field;
  detail::evaluate(ens.positions(), ens.weights(), ens.dim(), ens.positions(), soft.epsilon, true, field, nullptr);
  return field;
}

inline std::vector<FieldSample> self_consistent_field(const Ensemble& ens, const Softening& soft) {
  const auto field = self_consistent_accelerations(ens, soft);
  const int d = ens.dim();
  std::vector<FieldSample> out(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto x = ens.position(i);
    out[i].point.assign(x.begin(), x.end());
    out[i].field.assign(field.begin() + i * d, field.begin() + (i + 1) * d);
  }
  return out;
}

/// Pair sums needed by the energy and the virial balance.
struct PairSums {
  double potential_energy = 0.0;  ///< (1/(d(d-2)w_d)) sum_{i!=j} w_i w_j D_ij^{(2-d)/2}
  double softening_sum = 0.0;     ///< sum_{i<j} w_i w_j eps^2 D_ij^{-d/2}
};

inline PairSums pair_sums(const Ensemble& ens, const Softening& soft) {
  detail::check_softening(soft);
  const int d = ens.dim();
  if (d < 3) throw DomainError("potential energy requires d >= 3");
  const DimensionConstants c = DimensionConstants::of(d);
  const std::size_t n = ens.size();
  const double eps2 = soft.epsilon * soft.epsilon;
  std::vector<double> pot(n, 0.0), corr(n, 0.0);
  const auto x = ens.positions();
  const auto w = ens.weights();
  detail::dispatch_dim(d, [&](auto dim_tag) {
    constexpr int D = decltype(dim_tag)::value;
    const int dd = D ? D : d;
    parallel_for(n, [&](std::size_t i) {
      double p = 0.0, s = 0.0;
      const double* xi = x.data() + i * dd;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double* xj = x.data() + j * dd;
        double r2 = 0.0;
        for (int a = 0; a < dd; ++a) {
          const double diff = xi[a] - xj[a];
          r2 += diff * diff;
        }
        const double r2e = r2 + eps2;
        if (r2e == 0.0) throw SingularEvaluation("coincident particles with zero softening");
        const double inv_d = detail::inv_half_power<D>(r2e, dd);
        p += w[j] * inv_d * r2e;
        s += w[j] * inv_d;
      }
      pot[i] = w[i] * p;
      corr[i] = w[i] * s * eps2;
    });
  });
  PairSums out;
  for (std::size_t i = 0; i < n; ++i) {
    out.potential_energy += pot[i];
    out.softening_sum += corr[i];
  }
  out.potential_energy *= 2.0 * c.potential_coefficient;
  return out;
}

inline double potential_energy(const Ensemble& ens, const Softening& soft) {
  return pair_sums(ens, soft).potential_energy;
}

inline double kinetic_energy(const Ensemble& ens) {
  double sum = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    double v2 = 0.0;
    for (double a : ens.velocity(i)) v2 += a * a;
    sum += ens.weight(i) * v2;
  }
  return 0.5 * sum;
}

/// Hamiltonian of the particle system: KE + PE/2.
inline double total_energy(const Ensemble& ens, const Softening& soft) {
  return kinetic_energy(ens) + 0.5 * potential_energy(ens, soft);
}

/// Regular grid (per-axis `points_per_axis`, endpoints included) on the cube
/// [-radius, radius]^d, restricted to the closed ball of that radius.
inline std::vector<double> ball_grid(int d, int points_per_axis, double radius) {
  std::vector<double> out;
  if (points_per_axis <= 0) return out;
  std::vector<int> idx(d, 0);
  const double h = points_per_axis > 1 ? 2.0 * radius / (points_per_axis - 1) : 0.0;
  std::vector<double> p(d);
  while (true) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      p[a] = points_per_axis > 1 ? -radius + h * idx[a] : 0.0;
      r2 += p[a] * p[a];
    }
    if (r2 <= radius * radius * (1.0 + 1e-12)) out.insert(out.end(), p.begin(), p.end());
    int a = 0;
    while (a < d && ++idx[a] == points_per_axis) idx[a++] = 0;
    if (a == d) break;
  }
  return out;
}

inline std::vector<double> probe_points(const Ensemble& ens, const ProbeSpec& probe) {
  return ball_grid(ens.dim(), probe.grid_points, probe.radius_factor * ens.shifted_time());
}

/// max |E| over the probe set, reusing precomputed particle accelerations.
inline double sup_field_estimate(const Ensemble& ens, const Softening& soft, const ProbeSpec& probe,
                                 std::span<const double> particle_field) {
  const int d = ens.dim();
  double best = 0.0;
  if (probe.include_particles)
    for (std::size_t i = 0; i < ens.size(); ++i)
      best = std::max(best, detail::norm(particle_field.subspan(i * d, d)));
  const auto grid = probe_points(ens, probe);
  if (!grid.empty()) {
    std::vector<double> field;
    detail::evaluate(ens.positions(), ens.weights(), d, grid, soft.epsilon, false, field, nullptr);
    for (std::size_t i = 0; i < grid.size() / d; ++i)
      best = std::max(best, detail::norm(std::span<const double>(field).subspan(i * d, d)));
  }
  return best;
}

inline double sup_field_estimate(const Ensemble& ens, const Softening& soft, const ProbeSpec& probe) {
  std::vector<double> particle_field;
  if (probe.include_particles) particle_field = self_consistent_accelerations(ens, soft);
  return sup_field_estimate(ens, soft, probe, particle_field);
}

/// max over probes of the max-row-sum norm of grad E (self term excluded at particles).
inline double field_gradient_sup(const Ensemble& ens, const Softening& soft, const ProbeSpec& probe) {
  if (!(soft.epsilon > 0.0)) throw DomainError("field_gradient_sup: softening must be positive");
  const int d = ens.dim();
  double best = 0.0;
  std::vector<double> field, grad;
  if (probe.include_particles) {
    detail::evaluate(ens.positions(), ens.weights(), d, ens.positions(), soft.epsilon, true, field, &grad);
    for (std::size_t i = 0; i < ens.size(); ++i) best = std::max(best, detail::max_row_sum(grad.data() + i * d * d, d));
  }
  const auto grid = probe_points(ens, probe);
  if (!grid.empty()) {
    detail::evaluate(ens.positions(), ens.weights(), d, grid, soft.epsilon, false, field, &grad);
    for (std::size_t i = 0; i < grid.size() / d; ++i) best = std::max(best, detail::max_row_sum(grad.data() + i * d * d, d));
  }
  return best;
}

/// factor * mean nearest-neighbour distance; 0 for a single particle.
inline double auto_softening(const Ensemble& ens, double factor = 0.5) {
  const std::size_t n = ens.size();
  if (n < 2) return 0.0;
  const int d = ens.dim();
  const auto x = ens.positions();
  std::vector<double> nearest(n);
  parallel_for(n, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double diff = x[i * d + a] - x[j * d + a];
        r2 += diff * diff;
      }
      best = std::min(best, r2);
    }
    nearest[i] = std::sqrt(best);
  });
  double sum = 0.0;
  for (double r : nearest) sum += r;
  return factor * sum / static_cast<double>(n);
}

}  // namespace vlasov
