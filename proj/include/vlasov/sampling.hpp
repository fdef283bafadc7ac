#pragma once

// Initial-condition samplers.
//
// Draws are taken in the translated variables z = x - alpha v and v, then
// mapped back to x = z + alpha v, so the initial transported moments
// M_k(0) = sum w |z|^k are controlled directly by the z-distribution.
//
//   gaussian   z ~ N(0, z_scale^2 I), v ~ N(0, v_scale^2 I). All moments finite.
//   bump       z, v uniform on balls of radius z_scale, v_scale. Compact
//              support, all moments finite.
//   heavy-tail z Gaussian; v radially symmetric with P(|v| > r) =
//              (1 + r/v_scale)^{-tail_index}. E|v|^k < inf iff k < tail_index,
//              hence M_k(t) for t > 0 is finite iff k < tail_index (M_k(0)
//              is always finite because z is Gaussian).
//
// After drawing, empirical means of z and v are shifted to `center` and
// `drift` exactly (a single particle sits at the center). Weights are
// uniform, M/N.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"

namespace vlasov {

enum class SamplerKind { gaussian, bump, heavy_tail };

inline std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::gaussian: return "gaussian";
    case SamplerKind::bump: return "bump";
    case SamplerKind::heavy_tail: return "heavy-tail";
  }
  return "unknown";
}

inline SamplerKind parse_sampler_kind(const std::string& s) {
  if (s == "gaussian") return SamplerKind::gaussian;
  if (s == "bump") return SamplerKind::bump;
  if (s == "heavy-tail" || s == "heavy_tail") return SamplerKind::heavy_tail;
  throw DomainError("unknown sampler kind '" + s + "' (expected gaussian | bump | heavy-tail)");
}

struct SamplerSpec {
  SamplerKind kind = SamplerKind::gaussian;
  int dim = 4;
  double alpha = 1.0;
  std::size_t count = 4096;
  double total_charge = 1.0;
  double z_scale = 1.0;  ///< scale of x - alpha v
  double v_scale = 1.0;  ///< scale of v
  double tail_index = 8.0;  ///< heavy-tail only
  std::vector<double> center;  ///< mean of z; empty means origin
  std::vector<double> drift;   ///< mean of v; empty means zero
  /// Moment order that must be finite for the run (e.g. the check moment M_n).
  std::optional<double> required_moment;
};

/// Whether M_k(t) is finite for t > 0 under `spec`.
inline bool moment_is_finite(const SamplerSpec& spec, double k) {
  return spec.kind != SamplerKind::heavy_tail || k < spec.tail_index;
}

namespace detail {

// Portable draws from mt19937_64 output so samples do not depend on the
// standard library's distribution implementations.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  void unit_direction(std::span<double> out) {
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& a : out) {
        a = normal();
        n2 += a * a;
      }
    } while (n2 == 0.0);
    const double inv = 1.0 / std::sqrt(n2);
    for (double& a : out) a *= inv;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline void draw_gaussian(PortableRng& rng, double scale, std::span<double> out) {
  for (double& a : out) a = scale * rng.normal();
}

inline void draw_ball(PortableRng& rng, double radius, int d, std::span<double> out) {
  rng.unit_direction(out);
  const double r = radius * std::pow(rng.uniform(), 1.0 / d);
  for (double& a : out) a *= r;
}

inline void draw_power_tail(PortableRng& rng, double scale, double index, std::span<double> out) {
  rng.unit_direction(out);
  const double u = rng.uniform();
  const double r = scale * (std::pow(1.0 - u, -1.0 / index) - 1.0);
  for (double& a : out) a *= r;
}

inline void recenter(std::vector<double>& coords, std::size_t n, int d, const std::vector<double>& target) {
  for (int a = 0; a < d; ++a) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += coords[i * d + a];
    mean /= static_cast<double>(n);
    const double goal = target.empty() ? 0.0 : target[a];
    for (std::size_t i = 0; i < n; ++i) coords[i * d + a] += goal - mean;
  }
}

}  // namespace detail

inline Ensemble sample_initial(const SamplerSpec& spec, std::uint64_t seed) {
  const int d = spec.dim;
  if (d < 2) throw DomainError("sample_initial: dimension must be >= 2");
  if (spec.count < 1) throw DomainError("sample_initial: need at least one particle");
  if (!(spec.total_charge > 0.0)) throw DomainError("sample_initial: total charge must be positive");
  if (!(spec.z_scale >= 0.0) || !(spec.v_scale >= 0.0)) throw DomainError("sample_initial: scales must be >= 0");
  if (!spec.center.empty() && spec.center.size() != static_cast<std::size_t>(d))
    throw DomainError("sample_initial: center has wrong dimension");
  if (!spec.drift.empty() && spec.drift.size() != static_cast<std::size_t>(d))
    throw DomainError("sample_initial: drift has wrong dimension");
  if (spec.kind == SamplerKind::heavy_tail) {
    if (!(spec.tail_index > 0.0)) throw DomainError("sample_initial: tail index must be positive");
    if (spec.required_moment && !moment_is_finite(spec, *spec.required_moment))
      throw DomainError("sample_initial: heavy-tail index " + std::to_string(spec.tail_index) +
                        " makes M_" + std::to_string(*spec.required_moment) + " infinite");
  }

  const std::size_t n = spec.count;
  std::vector<double> z(n * d), v(n * d);
  detail::PortableRng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> zi(z.data() + i * d, d);
    std::span<double> vi(v.data() + i * d, d);
    switch (spec.kind) {
      case SamplerKind::gaussian:
        detail::draw_gaussian(rng, spec.z_scale, zi);
        detail::draw_gaussian(rng, spec.v_scale, vi);
        break;
      case SamplerKind::bump:
        detail::draw_ball(rng, spec.z_scale, d, zi);
        detail::draw_ball(rng, spec.v_scale, d, vi);
        break;
      case SamplerKind::heavy_tail:
        detail::draw_gaussian(rng, spec.z_scale, zi);
        detail::draw_power_tail(rng, spec.v_scale, spec.tail_index, vi);
        break;
    }
  }
  detail::recenter(z, n, d, spec.center);
  detail::recenter(v, n, d, spec.drift);

  std::vector<double> x(n * d);
  for (std::size_t k = 0; k < n * static_cast<std::size_t>(d); ++k) x[k] = z[k] + spec.alpha * v[k];
  std::vector<double> w(n, spec.total_charge / static_cast<double>(n));
  return Ensemble(d, spec.alpha, 0.0, std::move(x), std::move(v), std::move(w));
}

}  // namespace vlasov
