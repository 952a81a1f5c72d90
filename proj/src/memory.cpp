#include "viscowave/memory.hpp"

#include <cmath>
#include <stdexcept>

namespace viscowave {

void HistoryProfile::validate() const {
  switch (kind) {
    case Kind::constant:
      break;
    case Kind::ramp:
      if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("ramp history needs epsilon >= 0 to stay bounded on t <= 0");
      break;
    case Kind::oscillatory:
      if (!std::isfinite(beta) || !std::isfinite(omega))
        throw std::invalid_argument("oscillatory history needs finite beta and omega");
      break;
  }
}

double HistoryProfile::value(double t) const {
  switch (kind) {
    case Kind::constant:
      return 1.0;
    case Kind::ramp:
      return std::exp(epsilon * t);
    case Kind::oscillatory:
      return 1.0 + beta * std::sin(omega * t);
  }
  return 1.0;
}

double HistoryProfile::derivative_at_zero() const {
  switch (kind) {
    case Kind::constant:
      return 0.0;
    case Kind::ramp:
      return epsilon;
    case Kind::oscillatory:
      return beta * omega;
  }
  return 0.0;
}

double HistoryProfile::first_moment(const PronyMode& m) const {
  switch (kind) {
    case Kind::constant:
      return m.a;
    case Kind::ramp:
      return m.a / (1.0 + epsilon * m.tau);
    case Kind::oscillatory: {
      const double wt = omega * m.tau;
      return m.a * (1.0 - beta * wt / (1.0 + wt * wt));
    }
  }
  return m.a;
}

double HistoryProfile::second_moment(const PronyMode& m) const {
  switch (kind) {
    case Kind::constant:
      return m.a;
    case Kind::ramp:
      return m.a / (1.0 + 2.0 * epsilon * m.tau);
    case Kind::oscillatory: {
      const double wt = omega * m.tau;
      return m.a * (1.0 - 2.0 * beta * wt / (1.0 + wt * wt) +
                    0.5 * beta * beta * (1.0 - 1.0 / (1.0 + 4.0 * wt * wt)));
    }
  }
  return m.a;
}

Field InitialHistory::initial_velocity() const {
  if (velocity) return *velocity;
  return profile.derivative_at_zero() * shape;
}

namespace {

// Lag beyond which every mode has decayed below 1e-12 of its value at zero lag.
double eviction_horizon(const KernelSpec& kernel) {
  return kernel.empty() ? 0.0 : tau_max(kernel) * std::log(1e12);
}

}  // namespace

MemoryState::MemoryState(MemoryMode mode, const Grid& grid, const KernelSpec& kernel,
                         const InitialHistory& history)
    : grid_(grid), mode_count_(kernel.size()), profile_(history.profile), shape_(history.shape) {
  require_valid(kernel);
  history.profile.validate();
  detail::require_on_grid(grid, history.shape);
  u_last_ = history.shape;
  grad_last_ = inner_grad(grid, shape_, shape_);
  if (mode == MemoryMode::prony) {
    PronyMemory p;
    for (const auto& m : kernel.modes) {
      p.z.push_back(profile_.first_moment(m) * shape_);
      p.q.push_back(profile_.second_moment(m) * grad_last_);
    }
    repr_ = std::move(p);
  } else {
    QuadratureMemory qm;
    qm.horizon = eviction_horizon(kernel);
    qm.samples.push_front({0.0, shape_});
    repr_ = std::move(qm);
  }
}

void MemoryState::check(const KernelSpec& kernel) const {
  if (kernel.size() != mode_count_) throw std::invalid_argument("kernel/memory mode-count mismatch");
}

namespace {

// Trapezoid weights over the stored lags s_j = t - t_j (s_0 = 0).
std::vector<double> lag_weights(const QuadratureMemory& qm) {
  const std::size_t n = qm.samples.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double ds = qm.samples[j].time - qm.samples[j + 1].time;
    w[j] += 0.5 * ds;
    w[j + 1] += 0.5 * ds;
  }
  return w;
}

}  // namespace

Field MemoryState::convolution(const KernelSpec& kernel) const {
  check(kernel);
  Field acc = grid_.zeros();
  if (const auto* p = prony()) {
    for (const auto& zi : p->z) acc += zi;
    return acc;
  }
  const auto& qm = *quadrature();
  const auto w = lag_weights(qm);
  for (std::size_t j = 0; j < qm.samples.size(); ++j) {
    const double s = time_ - qm.samples[j].time;
    const double weight = w[j] * eval_mu(kernel, s);
    if (weight != 0.0) acc += weight * qm.samples[j].u;
  }
  // Lags s >= t reach into the analytic past history.
  double tail = 0.0;
  for (const auto& m : kernel.modes) tail += std::exp(-time_ / m.tau) * profile_.first_moment(m);
  if (tail != 0.0) acc += tail * shape_;
  return acc;
}

Field MemoryState::force(const KernelSpec& kernel) const {
  if (kernel.empty()) {
    check(kernel);
    return grid_.zeros();
  }
  return -laplacian(grid_, convolution(kernel));
}

std::vector<double> MemoryState::per_mode_energies(const KernelSpec& kernel, const Field& u_now) const {
  check(kernel);
  detail::require_on_grid(grid_, u_now);
  std::vector<double> h(mode_count_, 0.0);
  if (h.empty()) return h;
  const double gu = inner_grad(grid_, u_now, u_now);
  if (const auto* p = prony()) {
    const Field lap_u = laplacian(grid_, u_now);
    for (std::size_t i = 0; i < mode_count_; ++i) {
      // <grad u, grad z> = -<lap u, z> by summation by parts.
      const double cross = -inner_l2(grid_, lap_u, p->z[i]);
      h[i] = kernel.modes[i].a * gu - 2.0 * cross + p->q[i];
    }
    return h;
  }
  const auto& qm = *quadrature();
  const auto w = lag_weights(qm);
  for (std::size_t j = 0; j < qm.samples.size(); ++j) {
    if (w[j] == 0.0) continue;
    const Field diff = u_now - qm.samples[j].u;
    const double g = inner_grad(grid_, diff, diff);
    const double s = time_ - qm.samples[j].time;
    for (std::size_t i = 0; i < mode_count_; ++i) {
      const auto& m = kernel.modes[i];
      h[i] += w[j] * (m.a / m.tau) * std::exp(-s / m.tau) * g;
    }
  }
  const double cross = inner_grad(grid_, u_now, shape_);
  const double gphi = inner_grad(grid_, shape_, shape_);
  for (std::size_t i = 0; i < mode_count_; ++i) {
    const auto& m = kernel.modes[i];
    const double decay = std::exp(-time_ / m.tau);
    h[i] += decay * (m.a * gu - 2.0 * profile_.first_moment(m) * cross + profile_.second_moment(m) * gphi);
  }
  return h;
}

void MemoryState::advance(const KernelSpec& kernel, const Field& u_now, double grad_energy_now, double dt) {
  check(kernel);
  detail::require_on_grid(grid_, u_now);
  if (!(dt > 0.0)) throw std::invalid_argument("memory advance needs dt > 0");
  if (auto* p = std::get_if<PronyMemory>(&repr_)) {
    const Field u_avg = 0.5 * (u_last_ + u_now);
    const double g_avg = 0.5 * (grad_last_ + grad_energy_now);
    for (std::size_t i = 0; i < mode_count_; ++i) {
      const auto& m = kernel.modes[i];
      const double decay = std::exp(-dt / m.tau);
      const double gain = m.a * (-std::expm1(-dt / m.tau));
      p->z[i] = decay * p->z[i] + gain * u_avg;
      p->q[i] = decay * p->q[i] + gain * g_avg;
    }
  } else {
    auto& qm = std::get<QuadratureMemory>(repr_);
    const double t_new = time_ + dt;
    qm.samples.push_front({t_new, u_now});
    // Keep one sample past the horizon so the trapezoid still spans it.
    while (qm.samples.size() > 2 && t_new - qm.samples[qm.samples.size() - 2].time > qm.horizon)
      qm.samples.pop_back();
  }
  time_ += dt;
  u_last_ = u_now;
  grad_last_ = grad_energy_now;
}

double history_energy(const MemoryState& state, const KernelSpec& kernel, const Field& u_now) {
  double total = 0.0;
  for (double h : state.per_mode_energies(kernel, u_now)) total += h;
  return total;
}

double driven_sine_convolution(const KernelSpec& kernel, double omega, double t) {
  double acc = 0.0;
  for (const auto& m : kernel.modes) {
    const double r = 1.0 / m.tau;
    acc += (m.a * r) * (r * std::sin(omega * t) - omega * std::cos(omega * t) + omega * std::exp(-r * t)) /
           (r * r + omega * omega);
  }
  return acc;
}

}  // namespace viscowave
