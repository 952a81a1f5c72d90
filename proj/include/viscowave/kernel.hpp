#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace viscowave {

/// One exponential relaxation mode, contributing a e^{-s/tau} to k(s) - 1.
struct PronyMode {
  double a = 0.0;
  double tau = 1.0;
};

/// Relaxation kernel k(s) = 1 + sum_i a_i e^{-s/tau_i}.
///
/// The memory density is mu(s) = -k'(s) = sum_i (a_i/tau_i) e^{-s/tau_i}.
/// An empty mode list is the memoryless limit k == 1.
struct KernelSpec {
  std::vector<PronyMode> modes;

  std::size_t size() const { return modes.size(); }
  bool empty() const { return modes.empty(); }
};

struct KernelCheck {
  std::string condition;
  bool passed = false;
};

struct KernelValidation {
  bool valid = false;
  std::string first_violation;
  double k0 = 1.0;
  double mu_mass = 0.0;
  std::vector<KernelCheck> checks;
};

KernelValidation validate(const KernelSpec& spec);

/// Throws std::invalid_argument naming the first violated condition.
void require_valid(const KernelSpec& spec);

namespace detail {
inline void require_nonnegative_time(double s) {
  if (!(s >= 0.0)) throw std::domain_error("kernel evaluated at negative time");
}
}  // namespace detail

template <typename Scalar = double>
Scalar eval_k(const KernelSpec& spec, Scalar s) {
  detail::require_nonnegative_time(static_cast<double>(s));
  Scalar k(1);
  for (const auto& m : spec.modes) k += Scalar(m.a) * std::exp(-s / Scalar(m.tau));
  return k;
}

template <typename Scalar = double>
Scalar eval_mu(const KernelSpec& spec, Scalar s) {
  detail::require_nonnegative_time(static_cast<double>(s));
  Scalar mu(0);
  for (const auto& m : spec.modes) mu += Scalar(m.a / m.tau) * std::exp(-s / Scalar(m.tau));
  return mu;
}

template <typename Scalar = double>
Scalar eval_mu_prime(const KernelSpec& spec, Scalar s) {
  detail::require_nonnegative_time(static_cast<double>(s));
  Scalar d(0);
  for (const auto& m : spec.modes) d -= Scalar(m.a / (m.tau * m.tau)) * std::exp(-s / Scalar(m.tau));
  return d;
}

/// Integral of mu over [s, inf), equal to k(s) - 1.
template <typename Scalar = double>
Scalar tail_mass(const KernelSpec& spec, Scalar s) {
  detail::require_nonnegative_time(static_cast<double>(s));
  Scalar t(0);
  for (const auto& m : spec.modes) t += Scalar(m.a) * std::exp(-s / Scalar(m.tau));
  return t;
}

inline double k0(const KernelSpec& spec) { return eval_k(spec, 0.0); }

double tau_min(const KernelSpec& spec);
double tau_max(const KernelSpec& spec);

}  // namespace viscowave
