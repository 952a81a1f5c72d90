#include "viscowave/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace viscowave {

bool ModelParams::within_assumption() const { return m >= 1.0 && p >= 1.0 && p < 6.0 && p * (m + 1.0) / m < 6.0; }

void ModelParams::validate() const {
  if (!std::isfinite(p) || !std::isfinite(m) || p < 1.0 || m < 1.0)
    throw std::invalid_argument("exponents must satisfy p >= 1 and m >= 1");
  if (!within_assumption() && !allow_out_of_assumption)
    throw std::invalid_argument("exponents violate m >= 1, 1 <= p < 6, p(m+1)/m < 6");
}

void StepControl::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("cfl must lie in (0, 1]");
  if (!(dt_min > 0.0) || !(dt_min < dt_max)) throw std::invalid_argument("need 0 < dt_min < dt_max");
  if (!(amplitude_safety > 0.0)) throw std::invalid_argument("amplitude_safety must be positive");
  if (!(blowup_max_abs > 0.0) || !(blowup_h1 > 0.0)) throw std::invalid_argument("blow-up thresholds must be positive");
}

std::string BlowUpEvent::describe() const {
  std::ostringstream os;
  os << "blow-up after t=" << t << ":";
  if (non_finite) os << " non-finite state;";
  if (max_abs_exceeded) os << " max|u|=" << max_abs << ';';
  if (h1_exceeded) os << " |grad u|=" << h1 << ';';
  if (dt_collapsed) os << " dt=" << dt << " below dt_min;";
  return os.str();
}

double solve_damping(double r, double c, double m) {
  if (r == 0.0 || c == 0.0) return r;
  if (m == 1.0) return r / (1.0 + c);
  const double sign = r < 0.0 ? -1.0 : 1.0;
  const double target = std::abs(r);
  // g(v) = v + c v^m is increasing on [0, target] with g(0) <= target <= g(target).
  auto g = [&](double v) { return v + c * std::pow(v, m) - target; };
  double lo = 0.0, hi = target;
  double v = std::min(target, std::pow(target / c, 1.0 / m));
  for (int it = 0; it < 200; ++it) {
    const double gv = g(v);
    if (gv == 0.0) break;
    if (gv < 0.0)
      lo = v;
    else
      hi = v;
    const double dg = 1.0 + c * m * std::pow(v, m - 1.0);
    double next = v - gv / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - v) <= 1e-13 * std::abs(next) || hi - lo <= 1e-15 * hi) {
      v = next;
      break;
    }
    v = next;
  }
  return sign * v;
}

namespace {

Field source_term(const Field& u, double p) {
  if (p == 3.0) return u.array().cube().matrix();
  if (p == 1.0) return u;
  if (p == 2.0) return (u.array().abs() * u.array()).matrix();
  return (u.array().abs().pow(p - 1.0) * u.array()).matrix();
}

// |v|^{m-1} v, node by node.
Field damping_term(const Field& v, double m) {
  if (m == 1.0) return v;
  if (m == 2.0) return (v.array().abs() * v.array()).matrix();
  if (m == 3.0) return v.array().cube().matrix();
  return (v.array().abs().pow(m - 1.0) * v.array()).matrix();
}

void solve_damping_nodes(Field& v, double c, double m) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = solve_damping(v[i], c, m);
}

double stiffness_limit(const Grid& grid, const KernelSpec& kernel) {
  return grid.min_spacing() / std::sqrt(k0(kernel) * grid.dim());
}

}  // namespace

Field conservative_force(const Grid& grid, const Field& u, const MemoryState& memory, const ModelParams& params,
                         const KernelSpec& kernel) {
  Field f = k0(kernel) * laplacian(grid, u);
  if (!kernel.empty()) f += memory.force(kernel);
  if (params.source) f += source_term(u, params.p);
  return f;
}

State initial_state(const Grid& grid, const InitialHistory& history, const ModelParams& params,
                    const KernelSpec& kernel, MemoryMode mode) {
  params.validate();
  State s{grid, 0.0, history.shape, history.initial_velocity(), MemoryState(mode, grid, kernel, history), 0, 0.0,
          Field()};
  detail::require_on_grid(grid, s.v);
  s.force = conservative_force(grid, s.u, s.memory, params, kernel);
  return s;
}

double choose_dt(const State& state, const ModelParams& params, const KernelSpec& kernel, const StepControl& ctrl) {
  double dt = std::min(ctrl.cfl * stiffness_limit(state.grid, kernel), ctrl.dt_max);
  if (params.source) {
    const double amp = std::pow(max_abs(state.u), 0.5 * (params.p - 1.0));
    dt = std::min(dt, ctrl.amplitude_safety / (1.0 + amp));
  }
  return dt;
}

namespace {

std::optional<BlowUpEvent> advance(State& state, const ModelParams& params, const KernelSpec& kernel,
                                   const StepControl& ctrl, double dt) {
  const Grid& grid = state.grid;
  const double half = 0.5 * dt;
  Field v = state.v + half * state.force;
  if (params.damping) solve_damping_nodes(v, half, params.m);
  Field u = state.u + dt * v;

  BlowUpEvent ev;
  ev.t = state.t;
  ev.dt = dt;
  if (!u.allFinite()) {
    ev.non_finite = true;
    return ev;
  }
  const double grad2 = inner_grad(grid, u, u);
  ev.max_abs = max_abs(u);
  ev.h1 = std::sqrt(grad2);
  ev.max_abs_exceeded = ev.max_abs > ctrl.blowup_max_abs;
  ev.h1_exceeded = ev.h1 > ctrl.blowup_h1;
  if (ev.max_abs_exceeded || ev.h1_exceeded || !std::isfinite(grad2)) {
    ev.non_finite = !std::isfinite(grad2);
    return ev;
  }

  if (!kernel.empty()) state.memory.advance(kernel, u, grad2, dt);
  Field force = conservative_force(grid, u, state.memory, params, kernel);
  if (!params.damping) {
    v += half * force;
  } else if (ctrl.damping_scheme == DampingScheme::verlet) {
    v += half * (force - damping_term(v, params.m));
  } else {
    v += half * force;
    solve_damping_nodes(v, half, params.m);
  }

  state.u = std::move(u);
  state.v = std::move(v);
  state.force = std::move(force);
  state.t += dt;
  state.last_dt = dt;
  ++state.step_count;
  if (!state.v.allFinite() || !state.force.allFinite()) {
    ev.t = state.t;
    ev.non_finite = true;
    return ev;
  }
  return std::nullopt;
}

}  // namespace

std::optional<BlowUpEvent> step(State& state, const ModelParams& params, const KernelSpec& kernel,
                                const StepControl& ctrl, double dt_limit) {
  const double dt_ctrl = choose_dt(state, params, kernel, ctrl);
  if (dt_ctrl < ctrl.dt_min) {
    BlowUpEvent ev;
    ev.t = state.t;
    ev.dt = dt_ctrl;
    ev.dt_collapsed = true;
    ev.max_abs = max_abs(state.u);
    ev.h1 = h1_seminorm(state.grid, state.u);
    return ev;
  }
  return advance(state, params, kernel, ctrl, std::min(dt_ctrl, dt_limit));
}

std::optional<BlowUpEvent> step_fixed(State& state, const ModelParams& params, const KernelSpec& kernel,
                                      const StepControl& ctrl, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step size must be positive");
  return advance(state, params, kernel, ctrl, dt);
}

std::pair<double, double> fit_blowup(const std::vector<std::pair<double, double>>& hist) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (hist.size() < 3) return {nan, nan};
  const auto& [t0, a0] = hist[hist.size() - 3];
  const auto& [t1, a1] = hist[hist.size() - 2];
  const auto& [t2, a2] = hist[hist.size() - 1];
  if (!(a0 > 0.0 && a1 > 0.0 && a2 > 0.0) || !(t1 > t0 && t2 > t1)) return {nan, nan};
  // d(log A)/dt = b / (T - t): its reciprocal is linear in t with slope -1/b.
  const double r1 = std::log(a1 / a0) / (t1 - t0);
  const double r2 = std::log(a2 / a1) / (t2 - t1);
  if (!(r1 > 0.0 && r2 > 0.0)) return {nan, nan};
  const double m1 = 0.5 * (t0 + t1), m2 = 0.5 * (t1 + t2);
  const double slope = (1.0 / r2 - 1.0 / r1) / (m2 - m1);
  if (!(slope < 0.0)) return {nan, nan};
  const double b = -1.0 / slope;
  const double T = m2 + b / r2;
  return {T, b};
}

RunOutcome run(State& state, const ModelParams& params, const KernelSpec& kernel, const StepControl& ctrl,
               const RunOptions& options, const StepObserver& observer) {
  params.validate();
  ctrl.validate();
  require_valid(kernel);
  if (!(options.horizon >= state.t)) throw std::invalid_argument("horizon lies before the current time");

  RunOutcome out;
  std::vector<std::pair<double, double>> amplitude;
  auto note_amplitude = [&] {
    amplitude.emplace_back(state.t, max_abs(state.u));
    if (amplitude.size() > 8) amplitude.erase(amplitude.begin());
  };
  if (observer) observer(state);
  note_amplitude();

  const double eps_t = 1e-12 * std::max(1.0, options.horizon);
  while (state.t < options.horizon - eps_t) {
    double limit = options.horizon - state.t;
    if (options.sample_interval > 0.0) {
      const double next = (std::floor(state.t / options.sample_interval + 1e-9) + 1.0) * options.sample_interval;
      limit = std::min(limit, next - state.t);
    }
    auto ev = step(state, params, kernel, ctrl, limit);
    if (ev) {
      out.status = RunOutcome::Status::blew_up;
      out.event = ev;
      if (!ev->non_finite) {
        // The rejected candidate is the last amplitude sample.
        amplitude.emplace_back(state.t + ev->dt, ev->max_abs);
      }
      auto [T, b] = fit_blowup(amplitude);
      out.rate_exponent = b;
      out.t_obs = std::isfinite(T) && T >= state.t ? T : state.t;
      break;
    }
    if (observer) observer(state);
    note_amplitude();
  }
  out.t_final = state.t;
  out.steps = state.step_count;
  return out;
}

}  // namespace viscowave
