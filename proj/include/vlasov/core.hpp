#pragma once

// Domain types shared by every part of the simulator: the weighted particle
// ensemble and the dimension-dependent constants of the Riesz kernel.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vlasov {

/// Raised when a numerical precondition is violated (bad dimension, empty
/// ensemble, non-finite input, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double unit_ball_volume(int d) {
  if (d < 1) throw DomainError("unit_ball_volume: dimension must be >= 1, got " + std::to_string(d));
  const double half = 0.5 * d;
  return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

/// Constants of E = (1/(d w_d)) x/|x|^d and U = -(1/(d(d-2) w_d)) |x|^{2-d}.
struct DimensionConstants {
  int d = 0;
  double omega = 0.0;              ///< volume of the unit ball
  double field_coefficient = 0.0;  ///< 1/(d omega)
  double potential_coefficient = 0.0;  ///< 1/(d (d-2) omega); 0 for d = 2
  double a_tilde = 0.0;            ///< (d^2-d-4)/(d^2-2d-2), decay threshold

  static DimensionConstants of(int d) {
    if (d < 2) throw DomainError("DimensionConstants: dimension must be >= 2");
    DimensionConstants c;
    c.d = d;
    c.omega = unit_ball_volume(d);
    c.field_coefficient = 1.0 / (d * c.omega);
    c.potential_coefficient = d > 2 ? 1.0 / (d * (d - 2) * c.omega) : 0.0;
    const double dd = d;
    c.a_tilde = (dd * dd - dd - 4.0) / (dd * dd - 2.0 * dd - 2.0);
    return c;
  }

  /// Exponent (d-2)(d+1)/(d(k-2)) linking sup|E| to M_k.
  double moment_field_exponent(double k) const {
    return (d - 2.0) * (d + 1.0) / (d * (k - 2.0));
  }
};

/// Weighted particle cloud at time t: the empirical stand-in for f(t).
///
/// Coordinates are stored flat, particle-major: position(i) is
/// x[i*d .. i*d+d). Dimension, offset alpha, particle count and weights are
/// fixed at construction; only positions, velocities and time evolve.
class Ensemble {
 public:
  Ensemble() = default;

  Ensemble(int dim, double alpha, double time, std::vector<double> x,
           std::vector<double> v, std::vector<double> w)
      : dim_(dim), alpha_(alpha), time_(time), x_(std::move(x)), v_(std::move(v)), w_(std::move(w)) {
    if (dim_ < 2) throw DomainError("Ensemble: dimension must be >= 2");
    if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw DomainError("Ensemble: alpha must be finite and >= 0");
    if (!(time_ >= 0.0) || !std::isfinite(time_)) throw DomainError("Ensemble: time must be finite and >= 0");
    if (w_.empty()) throw DomainError("Ensemble: at least one particle required");
    const std::size_t n = w_.size() * static_cast<std::size_t>(dim_);
    if (x_.size() != n || v_.size() != n) throw DomainError("Ensemble: coordinate arrays do not match weights");
    for (double wi : w_)
      if (!(wi > 0.0) || !std::isfinite(wi)) throw DomainError("Ensemble: weights must be positive and finite");
    const double s = shifted_time();
    y_.resize(n);
    for (std::size_t k = 0; k < n; ++k) y_[k] = x_[k] - s * v_[k];
    if (!all_finite()) throw DomainError("Ensemble: non-finite coordinate");
  }

  int dim() const { return dim_; }
  double alpha() const { return alpha_; }
  double time() const { return time_; }
  /// t + alpha, the natural clock of the dispersive frame.
  double shifted_time() const { return time_ + alpha_; }
  std::size_t size() const { return w_.size(); }

  std::span<const double> positions() const { return x_; }
  std::span<const double> velocities() const { return v_; }
  std::span<const double> weights() const { return w_; }
  std::span<const double> position(std::size_t i) const { return {x_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }
  std::span<const double> velocity(std::size_t i) const { return {v_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }
  double weight(std::size_t i) const { return w_[i]; }

  /// y = x - (t+alpha) v, carried alongside x so that free transport leaves
  /// it bitwise unchanged.
  std::span<const double> translated() const { return y_; }
  std::span<const double> translated(std::size_t i) const {
    return {y_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }

  // Integrator access. Weights stay read-only; callers keep x = y + (t+alpha) v.
  std::span<double> mutable_positions() { return x_; }
  std::span<double> mutable_velocities() { return v_; }
  std::span<double> mutable_translated() { return y_; }

  /// Moves the clock keeping y and v, so positions follow the free flow.
  void set_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("Ensemble: time must be finite and >= 0");
    time_ = t;
    const double s = shifted_time();
    for (std::size_t k = 0; k < x_.size(); ++k) x_[k] = y_[k] + s * v_[k];
  }

  /// Copy with every weight multiplied by `factor` (> 0).
  Ensemble reweighted(double factor) const {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw DomainError("Ensemble: reweight factor must be positive");
    Ensemble out = *this;
    for (double& wi : out.w_) wi *= factor;
    return out;
  }

  bool all_finite() const {
    for (double a : x_)
      if (!std::isfinite(a)) return false;
    for (double a : v_)
      if (!std::isfinite(a)) return false;
    for (double a : y_)
      if (!std::isfinite(a)) return false;
    return true;
  }

  friend bool operator==(const Ensemble&, const Ensemble&) = default;

 private:
  int dim_ = 0;
  double alpha_ = 0.0;
  double time_ = 0.0;
  std::vector<double> x_;
  std::vector<double> v_;
  std::vector<double> w_;
  std::vector<double> y_;
};

inline double total_charge(const Ensemble& ens) {
  double sum = 0.0;
  for (double w : ens.weights()) sum += w;
  return sum;
}

/// |x_i - v_i (t+alpha)|, the translated radius of particle i.
inline double translated_radius(const Ensemble& ens, std::size_t i) {
  double r2 = 0.0;
  for (double y : ens.translated(i)) r2 += y * y;
  return std::sqrt(r2);
}

/// M_k = sum_i w_i |x_i - v_i (t+alpha)|^k for real k >= 0.
inline double transported_moment(const Ensemble& ens, double k) {
  if (!(k >= 0.0) || !std::isfinite(k)) throw DomainError("transported_moment: order must be finite and >= 0");
  double sum = 0.0;
  if (k == 0.0) return total_charge(ens);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    double r2 = 0.0;
    for (double y : ens.translated(i)) r2 += y * y;
    sum += ens.weight(i) * (k == 2.0 ? r2 : std::pow(r2, 0.5 * k));
  }
  return sum;
}

/// Scales weights so that M_n equals epsilon; positions and velocities are untouched.
inline Ensemble rescale_to_moment(const Ensemble& ens, double n, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("rescale_to_moment: epsilon must be positive");
  const double mn = transported_moment(ens, n);
  if (!(mn > 0.0) || !std::isfinite(mn))
    throw DomainError("rescale_to_moment: M_n must be positive and finite, got " + std::to_string(mn));
  return ens.reweighted(epsilon / mn);
}

}  // namespace vlasov
