#pragma once

#include "viscowave/grid.hpp"
#include "viscowave/kernel.hpp"

#include <deque>
#include <optional>
#include <variant>
#include <vector>

namespace viscowave {

/// Time profile g of a separable past history u0(x, t) = g(t) phi(x), t <= 0.
struct HistoryProfile {
  enum class Kind { constant, ramp, oscillatory };

  Kind kind = Kind::constant;
  double epsilon = 0.0;  // ramp: g(t) = e^{epsilon t}
  double beta = 0.0;     // oscillatory: g(t) = 1 + beta sin(omega t)
  double omega = 0.0;

  static HistoryProfile constant() { return {}; }
  static HistoryProfile ramp(double epsilon) { return {Kind::ramp, epsilon, 0.0, 0.0}; }
  static HistoryProfile oscillatory(double beta, double omega) {
    return {Kind::oscillatory, 0.0, beta, omega};
  }

  void validate() const;
  double value(double t) const;
  double derivative_at_zero() const;

  /// Integral over s in [0, inf) of mu_mode(s) g(-s).
  double first_moment(const PronyMode& mode) const;
  /// Integral over s in [0, inf) of mu_mode(s) g(-s)^2.
  double second_moment(const PronyMode& mode) const;
};

/// Past history u0(x, t) = g(t) phi(x) for t <= 0, with g(0) = 1.
struct InitialHistory {
  Field shape;
  HistoryProfile profile;
  /// Overrides u_t(0) = g'(0) phi when set.
  std::optional<Field> velocity;

  Field displacement(double t) const { return profile.value(t) * shape; }
  Field initial_velocity() const;
};

/// Prony auxiliary-field representation of the hereditary integral.
///
/// z_i(t) = int_0^inf mu_i(s) u(t-s) ds and q_i(t) = int_0^inf mu_i(s) |grad u(t-s)|^2 ds,
/// with mu_i(s) = (a_i/tau_i) e^{-s/tau_i}.
struct PronyMemory {
  std::vector<Field> z;
  std::vector<double> q;
};

/// Direct quadrature of the hereditary integral over stored past displacements.
struct QuadratureMemory {
  struct Sample {
    double time;
    Field u;
  };
  std::deque<Sample> samples;  // newest first
  double horizon = 0.0;        // samples older than this lag are evicted
};

enum class MemoryMode { prony, quadrature };

/// Memory state synchronized to a time t, holding either representation.
class MemoryState {
 public:
  MemoryState(MemoryMode mode, const Grid& grid, const KernelSpec& kernel, const InitialHistory& history);

  MemoryMode mode() const { return std::holds_alternative<PronyMemory>(repr_) ? MemoryMode::prony : MemoryMode::quadrature; }
  double time() const { return time_; }
  const Grid& grid() const { return grid_; }
  std::size_t mode_count() const { return mode_count_; }

  const PronyMemory* prony() const { return std::get_if<PronyMemory>(&repr_); }
  const QuadratureMemory* quadrature() const { return std::get_if<QuadratureMemory>(&repr_); }

  /// Sum over modes of z_i, i.e. int_0^inf mu(s) u(t-s) ds.
  Field convolution(const KernelSpec& kernel) const;
  Field force(const KernelSpec& kernel) const;
  std::vector<double> per_mode_energies(const KernelSpec& kernel, const Field& u_now) const;
  void advance(const KernelSpec& kernel, const Field& u_now, double grad_energy_now, double dt);

 private:
  void check(const KernelSpec& kernel) const;

  Grid grid_;
  std::size_t mode_count_ = 0;
  double time_ = 0.0;
  Field u_last_;
  double grad_last_ = 0.0;
  HistoryProfile profile_;
  Field shape_;
  std::variant<PronyMemory, QuadratureMemory> repr_;
};

/// Memory force F_mem in u_tt = k(0) lap u + F_mem - damping + source.
inline Field memory_force(const MemoryState& state, const KernelSpec& kernel) { return state.force(kernel); }

/// Per-mode history energies H_i = int_0^inf mu_i(s) |grad w(t, s)|^2 ds.
inline std::vector<double> per_mode_energies(const MemoryState& state, const KernelSpec& kernel,
                                             const Field& u_now) {
  return state.per_mode_energies(kernel, u_now);
}

/// int_0^inf |grad w(t, s)|^2 mu(s) ds with w(t, s) = u_now - u(t - s).
double history_energy(const MemoryState& state, const KernelSpec& kernel, const Field& u_now);

/// Advances the memory by dt, given the accepted displacement at the new time.
inline void advance_memory(MemoryState& state, const KernelSpec& kernel, const Field& u_now,
                           double grad_energy_now, double dt) {
  state.advance(kernel, u_now, grad_energy_now, dt);
}

/// Analytic int_0^t mu(s) sin(omega (t - s)) ds for a Prony kernel.
double driven_sine_convolution(const KernelSpec& kernel, double omega, double t);

}  // namespace viscowave
