#pragma once

#include "viscowave/grid.hpp"
#include "viscowave/kernel.hpp"
#include "viscowave/memory.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace viscowave {

/// Source exponent p and damping exponent m.
struct ModelParams {
  double p = 3.0;
  double m = 2.0;
  bool damping = true;
  bool source = true;
  /// Permits exponents outside m >= 1, 1 <= p < 6, p (m+1)/m < 6. Such runs are flagged in output.
  bool allow_out_of_assumption = false;

  bool within_assumption() const;
  void validate() const;
};

/// How damping enters the two half kicks. Both open with the implicit solve
/// v_half + (dt/2)|v_half|^{m-1} v_half = v + (dt/2) F.
enum class DampingScheme {
  /// Closing half kick reuses the damping at v_half explicitly (symmetric, second order).
  verlet,
  /// Closing half kick is implicit in the new velocity as well (first order, L-stable).
  backward_euler,
};

struct StepControl {
  double cfl = 0.5;
  double dt_max = 1e-3;
  double dt_min = 1e-10;
  /// Caps dt at amplitude_safety / (1 + max|u|^{(p-1)/2}) while the source is on.
  double amplitude_safety = 0.2;
  double blowup_max_abs = 1e8;
  double blowup_h1 = 1e8;
  DampingScheme damping_scheme = DampingScheme::verlet;

  void validate() const;
};

struct State {
  Grid grid;
  double t = 0.0;
  Field u;
  Field v;
  MemoryState memory;
  long step_count = 0;
  double last_dt = 0.0;
  /// k(0) lap u + F_mem + source at the current u; kept for the next half kick.
  Field force;
};

struct BlowUpEvent {
  double t = 0.0;  // last accepted time
  double max_abs = 0.0;
  double h1 = 0.0;
  double dt = 0.0;
  bool max_abs_exceeded = false;
  bool h1_exceeded = false;
  bool dt_collapsed = false;
  bool non_finite = false;

  std::string describe() const;
};

/// Unique root of v + c |v|^{m-1} v = r for c >= 0, m >= 1.
double solve_damping(double r, double c, double m);

/// Conservative part of the acceleration: k(0) lap u + F_mem + |u|^{p-1} u.
Field conservative_force(const Grid& grid, const Field& u, const MemoryState& memory, const ModelParams& params,
                         const KernelSpec& kernel);

State initial_state(const Grid& grid, const InitialHistory& history, const ModelParams& params,
                    const KernelSpec& kernel, MemoryMode mode = MemoryMode::prony);

/// Step size the controller would pick for the current state.
double choose_dt(const State& state, const ModelParams& params, const KernelSpec& kernel, const StepControl& ctrl);

/// Advances one step, by at most dt_limit. Returns a blow-up event instead of
/// accepting a step that would cross a threshold; the state then stays at the
/// last accepted step.
std::optional<BlowUpEvent> step(State& state, const ModelParams& params, const KernelSpec& kernel,
                                const StepControl& ctrl,
                                double dt_limit = std::numeric_limits<double>::infinity());

/// Same as `step` but with an externally fixed dt (no controller, no dt_min check).
std::optional<BlowUpEvent> step_fixed(State& state, const ModelParams& params, const KernelSpec& kernel,
                                      const StepControl& ctrl, double dt);

struct RunOptions {
  double horizon = 1.0;
  /// When positive, steps are shortened so the observer sees every multiple of this time.
  double sample_interval = 0.0;
};

struct RunOutcome {
  enum class Status { completed, blew_up };
  Status status = Status::completed;
  double t_final = 0.0;
  long steps = 0;
  std::optional<BlowUpEvent> event;
  /// Blow-up time estimate: last accepted t plus the amplitude-growth extrapolation.
  double t_obs = std::numeric_limits<double>::quiet_NaN();
  /// Fitted exponent b in max|u| ~ (T - t)^{-b}. Diagnostic only.
  double rate_exponent = std::numeric_limits<double>::quiet_NaN();

  bool blew_up() const { return status == Status::blew_up; }
};

/// Called with the initial state and after every accepted step.
using StepObserver = std::function<void(const State&)>;

RunOutcome run(State& state, const ModelParams& params, const KernelSpec& kernel, const StepControl& ctrl,
               const RunOptions& options, const StepObserver& observer = {});

/// Fits max|u| ~ C (T - t)^{-b} through the last three samples; returns {T, b}.
std::pair<double, double> fit_blowup(const std::vector<std::pair<double, double>>& amplitude_history);

}  // namespace viscowave
