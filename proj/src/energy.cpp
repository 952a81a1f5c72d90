#include "viscowave/energy.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace viscowave {

double damping_power(const State& state, const ModelParams& params) {
  if (!params.damping) return 0.0;
  return lp_power(state.grid, state.v, params.m + 1.0);
}

double memory_power(const State& state, const KernelSpec& kernel) {
  if (kernel.empty()) return 0.0;
  const auto h = state.memory.per_mode_energies(kernel, state.u);
  double acc = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] / kernel.modes[i].tau;
  return 0.5 * acc;
}

namespace {

EnergyReport base_report(const State& state, const ModelParams& params, const KernelSpec& kernel,
                         std::vector<double>* modes_out) {
  const Grid& g = state.grid;
  EnergyReport r;
  r.t = state.t;
  r.kinetic = 0.5 * inner_l2(g, state.v, state.v);
  r.grad_squared = inner_grad(g, state.u, state.u);
  r.elastic = 0.5 * r.grad_squared;
  auto modes = state.memory.per_mode_energies(kernel, state.u);
  double hist = 0.0;
  for (double h : modes) hist += h;
  r.history = 0.5 * hist;
  r.scriptE = r.kinetic + r.elastic + r.history;
  r.lp_power = lp_power(g, state.u, params.p + 1.0);
  r.potential = params.source ? r.lp_power / (params.p + 1.0) : 0.0;
  r.totalE = r.scriptE - r.potential;
  r.G = -r.totalE;
  r.N = 0.5 * inner_l2(g, state.u, state.u);
  r.Nprime = inner_l2(g, state.u, state.v);
  r.max_abs = max_abs(state.u);
  r.post_blowup = !std::isfinite(r.scriptE) || !std::isfinite(r.potential);
  if (modes_out) *modes_out = std::move(modes);
  return r;
}

void apply_lyapunov(EnergyReport& r, const std::optional<LyapunovParams>& ly) {
  if (ly && ly->shift + r.G > 0.0) r.Y = std::pow(ly->shift + r.G, 1.0 - ly->alpha) + ly->epsilon * r.Nprime;
}

}  // namespace

EnergyReport report(const State& state, const ModelParams& params, const KernelSpec& kernel,
                    const EnergyAccumulators& acc, const std::optional<LyapunovParams>& lyapunov) {
  EnergyReport r = base_report(state, params, kernel, nullptr);
  r.damping_cum = acc.damping_cum;
  r.memory_cum = acc.memory_cum;
  const double e0 = acc.started ? acc.totalE0 : r.totalE;
  r.identity_residual = r.totalE + r.damping_cum + r.memory_cum - e0;
  apply_lyapunov(r, lyapunov);
  return r;
}

double potential_functional_J(const Grid& grid, const Field& u, double p) {
  return 0.5 * inner_grad(grid, u, u) - lp_power(grid, u, p + 1.0) / (p + 1.0);
}

double mountain_pass_sup(const Grid& grid, const Field& u, double p) {
  if (!(p > 1.0)) throw std::invalid_argument("mountain pass level needs p > 1");
  const double grad = h1_seminorm(grid, u);
  const double lp = norm_lp(grid, u, p + 1.0);
  if (!(lp > 0.0)) throw std::invalid_argument("mountain pass level undefined for the zero field");
  return (0.5 - 1.0 / (p + 1.0)) * std::pow(grad / lp, 2.0 * (p + 1.0) / (p - 1.0));
}

EnergyRecorder::EnergyRecorder(ModelParams params, KernelSpec kernel, int cadence,
                               std::optional<LyapunovParams> lyapunov)
    : params_(params), kernel_(std::move(kernel)), cadence_(cadence), lyapunov_(lyapunov) {
  if (cadence_ < 1) throw std::invalid_argument("recorder cadence must be >= 1");
}

void EnergyRecorder::observe(const State& state) {
  std::vector<double> modes;
  EnergyReport r = base_report(state, params_, kernel_, &modes);
  const double damping_rate = params_.damping ? lp_power(state.grid, state.v, params_.m + 1.0) : 0.0;
  double memory_rate = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) memory_rate += 0.5 * modes[i] / kernel_.modes[i].tau;

  if (!acc_.started) {
    acc_.started = true;
    acc_.totalE0 = r.totalE;
  } else {
    const double dt = state.t - last_t_;
    acc_.damping_cum += 0.5 * dt * (last_damping_rate_ + damping_rate);
    acc_.memory_cum += 0.5 * dt * (last_memory_rate_ + memory_rate);
  }
  last_t_ = state.t;
  last_damping_rate_ = damping_rate;
  last_memory_rate_ = memory_rate;

  r.damping_cum = acc_.damping_cum;
  r.memory_cum = acc_.memory_cum;
  r.identity_residual = r.totalE + r.damping_cum + r.memory_cum - acc_.totalE0;
  apply_lyapunov(r, lyapunov_);

  last_kept_ = observed_ % cadence_ == 0;
  if (last_kept_) reports_.push_back(r);
  last_ = r;
  ++observed_;
}

void EnergyRecorder::finish() {
  if (observed_ > 0 && !last_kept_) {
    reports_.push_back(last_);
    last_kept_ = true;
  }
}

void write_energy_csv_header(std::ostream& os) {
  for (std::size_t i = 0; i < kEnergyColumns.size(); ++i) os << (i ? "," : "") << kEnergyColumns[i];
  os << '\n';
}

void write_energy_csv_row(std::ostream& os, const EnergyReport& r) {
  os << std::setprecision(17) << r.t << ',' << r.kinetic << ',' << r.elastic << ',' << r.history << ','
     << r.scriptE << ',' << r.potential << ',' << r.totalE << ',' << r.G << ',' << r.N << ',' << r.Nprime << ','
     << r.damping_cum << ',' << r.memory_cum << ',' << r.identity_residual << ',';
  if (std::isfinite(r.Y)) os << r.Y;
  else os << "nan";
  os << '\n';
}

}  // namespace viscowave
