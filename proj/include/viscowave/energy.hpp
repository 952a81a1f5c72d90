#pragma once

#include "viscowave/dynamics.hpp"

#include <array>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace viscowave {

/// Energy bookkeeping at one instant.
struct EnergyReport {
  double t = 0.0;
  double kinetic = 0.0;
  double elastic = 0.0;
  double history = 0.0;
  double scriptE = 0.0;  // quadratic energy
  double potential = 0.0;
  double totalE = 0.0;
  double G = 0.0;
  double N = 0.0;
  double Nprime = 0.0;
  double damping_cum = 0.0;
  double memory_cum = 0.0;
  double identity_residual = 0.0;
  double Y = std::numeric_limits<double>::quiet_NaN();

  // Not part of the CSV.
  double lp_power = 0.0;     // |u|_{p+1}^{p+1}
  double grad_squared = 0.0;  // |grad u|_2^2
  double max_abs = 0.0;
  bool post_blowup = false;
};

inline constexpr std::array<const char*, 14> kEnergyColumns = {
    "t", "kinetic", "elastic", "history", "scriptE", "potential", "totalE",
    "G", "N", "Nprime", "damping_cum", "memory_cum", "identity_residual", "Y"};

/// Parameters of the Lyapunov function Y = (shift + G)^{1-alpha} + epsilon N'.
/// shift = 0 for negative initial energy; shift = M in the positive-energy regime.
struct LyapunovParams {
  double alpha = 0.0;
  double epsilon = 0.0;
  double shift = 0.0;
};

/// Running time integrals of the dissipation rates.
struct EnergyAccumulators {
  double damping_cum = 0.0;
  double memory_cum = 0.0;
  double totalE0 = 0.0;
  bool started = false;
};

/// |v|_{m+1}^{m+1}.
double damping_power(const State& state, const ModelParams& params);
/// -1/2 int mu'(s) |grad w|^2 ds = 1/2 sum_i H_i / tau_i for a Prony kernel.
double memory_power(const State& state, const KernelSpec& kernel);

EnergyReport report(const State& state, const ModelParams& params, const KernelSpec& kernel,
                    const EnergyAccumulators& acc, const std::optional<LyapunovParams>& lyapunov = std::nullopt);

/// J(u) = 1/2 |grad u|^2 - |u|_{p+1}^{p+1} / (p+1).
double potential_functional_J(const Grid& grid, const Field& u, double p);
/// sup over lambda >= 0 of J(lambda u), in closed form.
double mountain_pass_sup(const Grid& grid, const Field& u, double p);

/// Integrates the dissipation rates by trapezoid at every accepted step and
/// keeps a report every `cadence` steps (the final state is always kept).
class EnergyRecorder {
 public:
  EnergyRecorder(ModelParams params, KernelSpec kernel, int cadence = 1,
                 std::optional<LyapunovParams> lyapunov = std::nullopt);

  void observe(const State& state);
  /// Reports the most recent observed state if the cadence skipped it.
  void finish();

  const std::vector<EnergyReport>& reports() const { return reports_; }
  const EnergyReport& last() const { return last_; }
  const EnergyAccumulators& accumulators() const { return acc_; }
  void set_lyapunov(std::optional<LyapunovParams> ly) { lyapunov_ = ly; }

 private:
  ModelParams params_;
  KernelSpec kernel_;
  int cadence_;
  std::optional<LyapunovParams> lyapunov_;
  EnergyAccumulators acc_;
  double last_t_ = 0.0;
  double last_damping_rate_ = 0.0;
  double last_memory_rate_ = 0.0;
  long observed_ = 0;
  bool last_kept_ = false;
  EnergyReport last_;
  std::vector<EnergyReport> reports_;
};

void write_energy_csv_header(std::ostream& os);
void write_energy_csv_row(std::ostream& os, const EnergyReport& r);

}  // namespace viscowave
