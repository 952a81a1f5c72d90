#include "viscowave/kernel.hpp"

#include <algorithm>
#include <limits>

namespace viscowave {

KernelValidation validate(const KernelSpec& spec) {
  KernelValidation out;
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    const auto& m = spec.modes[i];
    if (!std::isfinite(m.a) || !(m.a > 0.0)) {
      out.first_violation = "mode " + std::to_string(i) + ": amplitude must be positive";
      break;
    }
    if (!std::isfinite(m.tau) || !(m.tau > 0.0)) {
      out.first_violation = "mode " + std::to_string(i) + ": relaxation time must be positive";
      break;
    }
  }
  out.valid = out.first_violation.empty();
  if (!out.valid) return out;

  out.k0 = eval_k(spec, 0.0);
  out.mu_mass = tail_mass(spec, 0.0);
  const bool has_memory = !spec.empty();
  // Prony sums satisfy the remaining conditions by construction once the
  // amplitudes and relaxation times are positive.
  out.checks = {
      {"k in C^2(R+)", true},
      {"k'(s) < 0 for s > 0", has_memory},
      {"k(inf) = 1", true},
      {"mu in C^1(R+) and L^1(R+)", true},
      {"mu'(s) <= 0 for s > 0", true},
      {"mu(inf) = 0", true},
  };
  return out;
}

void require_valid(const KernelSpec& spec) {
  auto v = validate(spec);
  if (!v.valid) throw std::invalid_argument(v.first_violation);
}

double tau_min(const KernelSpec& spec) {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& m : spec.modes) t = std::min(t, m.tau);
  return t;
}

double tau_max(const KernelSpec& spec) {
  double t = 0.0;
  for (const auto& m : spec.modes) t = std::max(t, m.tau);
  return t;
}

}  // namespace viscowave
