// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include "viscowave/criteria.hpp"
#include "viscowave/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace viscowave;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentConfig base_config(double amplitude, double a, double p, double m) {
  json doc = {{"schema_version", 1},
              {"grid", {{"dim", 1}, {"extent", {1.0}}, {"nodes", {255}}}},
              {"kernel", json::array({{{"a", a}, {"tau", 1.0}}})},
              {"model", {{"p", p}, {"m", m}}},
              {"initial", {{"shape", {{"kind", "sine"}}}, {"amplitude", amplitude}}},
              {"horizon", 2.0}};
  return parse_config(doc);
}

Field sine_mode(const Grid& g, int k) {
  return g.sample([&](const std::array<double, 3>& x) { return std::sin(k * M_PI * x[0]); });
}

const Grid& grid255() {
  static const Grid g = Grid::interval(1.0, 255);
  return g;
}

double gamma255() {
  static const double g = sobolev_gamma(grid255(), 3.0).gamma;
  return g;
}

// Max |identity_residual| / |E(0)| over every accepted step before blow-up.
struct ResidualRun {
  double ratio = 0.0;
  double ratio_early = 0.0;  // t <= 0.5
  double t_end = 0.0;
  bool blew_up = false;
};

ResidualRun residual_run(double dt_max) {
  ExperimentConfig cfg = base_config(4.0, 1.0, 3.0, 2.0);
  cfg.step.dt_max = dt_max;
  cfg.lyapunov = false;
  double worst = 0.0, early = 0.0, e0 = 0.0;
  bool first = true;
  EnergyRecorder rec(cfg.model, cfg.kernel);
  State s = initial_state(cfg.grid, initial_history(cfg, cfg.amplitude), cfg.model, cfg.kernel);
  auto out = run(s, cfg.model, cfg.kernel, cfg.step, RunOptions{cfg.horizon, 0.0}, [&](const State& st) {
    rec.observe(st);
    if (first) e0 = std::abs(rec.last().totalE), first = false;
    const double r = std::abs(rec.last().identity_residual);
    worst = std::max(worst, r);
    if (st.t <= 0.5) early = std::max(early, r);
  });
  return {worst / e0, early / e0, out.t_final, out.blew_up()};
}

Verdict criterion1() {
  const ResidualRun a = residual_run(1e-3), b = residual_run(5e-4);
  const double factor = b.ratio > 0.0 ? a.ratio / b.ratio : INFINITY;
  const bool pass = !a.blew_up && !b.blew_up && a.ratio <= 1e-4 && factor >= 3.5;
  return {pass, fmt("A=4 on [0,2]: %s at t=%.5g; max|res|/|E0|=%.3e (dt=1e-3), %.3e (dt=5e-4), halving factor %.2f; "
                    "t<=0.5 window: %.3e, factor %.2f",
                    a.blew_up ? "blew up" : "completed", a.t_end, a.ratio, b.ratio, factor, a.ratio_early,
                    a.ratio_early / b.ratio_early)};
}

Verdict criterion2() {
  const Grid& g = grid255();
  ModelParams mp{3.0, 2.0, false, false, false};
  KernelSpec none;
  const Field phi = sine_mode(g, 1);
  State s = initial_state(g, {phi, HistoryProfile::constant(), std::nullopt}, mp, none);
  StepControl c;
  c.cfl = 0.5;
  c.dt_max = 1.0;
  EnergyRecorder rec(mp, none);
  double drift = 0.0, e0 = 0.0, l2_err = NAN;
  run(s, mp, none, c, RunOptions{20.0, 10.0}, [&](const State& st) {
    rec.observe(st);
    if (st.step_count == 0) e0 = rec.last().scriptE;
    drift = std::max(drift, std::abs(rec.last().scriptE - e0) / e0);
    if (std::abs(st.t - 10.0) < 1e-12) {
      const Field exact = std::cos(10.0 * M_PI) * phi;
      l2_err = norm_l2(g, Field(st.u - exact)) / norm_l2(g, exact);
    }
  });
  const bool pass = drift <= 1e-6 && l2_err <= 1e-3;
  return {pass, fmt("dt=%.4g: max|scriptE-scriptE0|/scriptE0=%.3e over [0,20] (tol 1e-6); L2 error at t=10 %.3e (tol 1e-3)",
                    choose_dt(s, mp, none, c), drift, l2_err)};
}

Verdict criterion3() {
  json doc = {{"schema_version", 1},
              {"kernel", json::array({{{"a", 1.0}, {"tau", 1.0}}})},
              {"horizon", 10.0},
              {"drive", {{"omega", 1.0}, {"dt", 1e-3}}}};
  const MemoryComparison m = compare_memory(parse_config(doc));
  const double worst = std::max({m.max_force_diff, m.max_history_diff, m.max_prony_vs_analytic,
                                 m.max_quadrature_vs_analytic});
  return {worst <= 1e-3, fmt("force %.2e, history energy %.2e, Prony vs analytic %.2e, quadrature vs analytic %.2e (tol 1e-3)",
                             m.max_force_diff, m.max_history_diff, m.max_prony_vs_analytic,
                             m.max_quadrature_vs_analytic)};
}

Verdict criterion4() {
  ExperimentConfig cfg = base_config(6.0, 1.0, 3.0, 2.0);
  cfg.horizon = 10.0;
  const auto t0 = std::chrono::steady_clock::now();
  RunArtifacts art = execute_run(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const RunSummary& s = art.summary;
  const bool have_y = s.monitors.Y_nonincreasing_steps.has_value();
  const long bad_y = have_y ? *s.monitors.Y_nonincreasing_steps : -1;
  const bool pass = s.outcome.blew_up() && !s.numerical_fault && s.assessment.initial.totalE < 0.0 &&
                    s.monitors.max_G_drop <= 1e-8 && have_y && bad_y == 0 && secs < 120.0;
  std::string tmax = s.assessment.proof && s.assessment.proof->Tmax_bound
                         ? fmt("%.4g", *s.assessment.proof->Tmax_bound)
                         : std::string("n/a");
  return {pass, fmt("E0=%.4f; blow-up at t=%.5g (%ld steps); max relative G drop %.2e (tol 1e-8); Y non-increasing on "
                    "%ld of %ld steps (alpha=%.5g, epsilon=%.4g); Tmax bound %s; %.1f s",
                    s.assessment.initial.totalE, s.outcome.t_final, s.outcome.steps, s.monitors.max_G_drop, bad_y,
                    s.monitors.steps_observed, s.assessment.proof ? s.assessment.proof->alpha : NAN,
                    s.assessment.proof ? s.assessment.proof->epsilon : NAN, tmax.c_str(), secs)};
}

// Positive-energy data found by scanning kernel amplitude and A under the
// discrete gamma; shared with the persistence check.
struct PositiveRun {
  double a, A;
  RunSummary summary;
};

const std::vector<PositiveRun>& positive_runs() {
  static const std::vector<PositiveRun> runs = [] {
    std::vector<PositiveRun> out;
    for (double a : {0.25, 0.5, 1.0}) {
      std::vector<double> admissible;
      for (double A = 3.6; A <= 5.1 + 1e-9; A += 0.02) {
        ExperimentConfig cfg = base_config(A, a, 3.0, 2.0);
        const Assessment as = assess(cfg, A, gamma255());
        if (as.criteria && as.criteria->hyp.positive_energy_blowup()) admissible.push_back(A);
      }
      if (admissible.empty()) continue;
      const double A = admissible[admissible.size() / 2];
      ExperimentConfig cfg = base_config(A, a, 3.0, 2.0);
      cfg.horizon = 30.0;
      out.push_back({a, A, execute_run(cfg).summary});
    }
    return out;
  }();
  return runs;
}

Verdict criterion5() {
  const auto& runs = positive_runs();
  if (runs.empty()) return {false, "no admissible data found in the scan"};
  bool pass = true;
  std::ostringstream os;
  for (const auto& r : runs) {
    const auto& s = r.summary;
    const double e = s.monitors.min_scriptE_over_y1.value_or(NAN);
    const double l = s.monitors.min_lp_over_C0.value_or(NAN);
    const bool ok = s.outcome.blew_up() && !s.numerical_fault && e >= 1.0 - 1e-3 && l >= 1.0 - 1e-3;
    pass = pass && ok;
    os << fmt("[a=%.2g A=%.2f E0=%.4g M=%.4g: %s t=%.4g, min scriptE/y1=%.6f, min |u|^4/C0=%.6f] ", r.a, r.A,
              s.assessment.initial.totalE, s.assessment.criteria->M, s.outcome.blew_up() ? "blow-up" : "no blow-up",
              s.outcome.t_final, e, l);
  }
  return {pass, os.str()};
}

Verdict criterion6() {
  ExperimentConfig cfg = base_config(6.0, 1.0, 3.0, 3.0);
  State s = initial_state(cfg.grid, initial_history(cfg, cfg.amplitude), cfg.model, cfg.kernel);
  EnergyRecorder rec(cfg.model, cfg.kernel);
  rec.observe(s);
  const double se0 = rec.last().scriptE;
  double prevE = rec.last().totalE, max_rise = 0.0, max_ratio = 1.0;
  const double horizon = 50.0;
  std::string stop;
  while (s.t < horizon) {
    const double dt = std::min(choose_dt(s, cfg.model, cfg.kernel, cfg.step), horizon - s.t);
    if (dt < cfg.step.dt_min) {
      stop = fmt("step size collapsed at t=%.5g", s.t);
      break;
    }
    if (auto ev = step_fixed(s, cfg.model, cfg.kernel, cfg.step, dt)) {
      stop = fmt("blow-up at t=%.5g", s.t);
      break;
    }
    rec.observe(s);
    const EnergyReport& r = rec.last();
    max_rise = std::max(max_rise, (r.totalE - prevE) / std::abs(prevE));
    prevE = r.totalE;
    max_ratio = std::max(max_ratio, r.scriptE / se0);
    // Stop at the first violation; the rest of the horizon cannot repair it.
    if (r.scriptE > 2.0 * se0) {
      stop = fmt("scriptE exceeded 2 scriptE(0) at t=%.5g", s.t);
      break;
    }
    if (max_rise > 1e-8) {
      stop = fmt("totalE rose at t=%.5g", s.t);
      break;
    }
  }
  const bool pass = stop.empty() && max_ratio <= 2.0 && max_rise <= 1e-8;
  return {pass, fmt("p=m=3, A=6, E0=%.4f: %s; max scriptE/scriptE0=%.4g (bound 2); max relative totalE rise %.2e (tol 1e-8)",
                    rec.reports().front().totalE, stop.empty() ? "reached t=50" : stop.c_str(), max_ratio, max_rise)};
}

Verdict criterion7() {
  const Grid& g = grid255();
  const double y_0 = y0(gamma255(), 3.0);
  ModelParams mp{3.0, 2.0, true, true, false};
  KernelSpec k{{{1.0, 1.0}}};
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> modes(1, 8);
  int counter = 0;
  double min_margin = INFINITY;
  for (int i = 0; i < 200; ++i) {
    Field u = g.zeros();
    const int nm = modes(rng);
    for (int j = 1; j <= nm; ++j) u += n01(rng) / j * sine_mode(g, j);
    if (i % 2) for (auto& x : u) x += 0.05 * n01(rng);
    const double ratio = lp_power(g, u, 4.0) / inner_grad(g, u, u);
    u *= std::sqrt(1.0 / ratio) * (1.0 + 1e-6 + std::abs(n01(rng)));
    const State s = initial_state(g, {u, HistoryProfile::constant(), std::nullopt}, mp, k);
    const EnergyReport r = report(s, mp, k, EnergyAccumulators{});
    if (!(r.lp_power > r.grad_squared)) return {false, "field construction failed"};
    min_margin = std::min(min_margin, r.scriptE / y_0);
    if (!(r.scriptE > y_0)) ++counter;
  }
  return {counter == 0, fmt("%d counterexamples among 200 fields; min scriptE(0)/y0=%.4f", counter, min_margin)};
}

Verdict criterion8() {
  auto close = [](double x, double want) { return std::abs(x - want) <= 1e-12 * std::max(1.0, std::abs(want)); };
  const double y1 = solve_y1(0.09, 1.0, 3.0, 4.0);
  const double C0 = C0_bound(y1, 1.0, 3.0);
  const double c = c_constant(C0, y1, 4.0);
  const bool fixed = close(y0(1.0, 3.0), 0.5) && close(d_level(1.0, 3.0), 0.25) && close(ystar(1.0, 3.0, 4.0), 0.75) &&
                     close(M_level(1.0, 3.0, 4.0), 0.1875) && close(y1, 0.9) && close(C0, 3.24) && close(c, 1.0 / 12.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ug(0.1, 3.0), up(1.2, 5.0), u01(1e-6, 1.0 - 1e-6);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const double g = ug(rng), p = up(rng);
    const double sk = 1.0 + u01(rng) * (p - 1.0);
    const double M = M_level(g, p, sk * sk), d = d_level(g, p);
    if (!(0.0 < M && M < d)) ++bad;
  }
  return {fixed && bad == 0, fmt("y0=%.15g d=%.15g y*=%.15g M=%.15g y1=%.15g C0=%.15g c=%.15g; ordering violations %d/1000",
                                 y0(1.0, 3.0), d_level(1.0, 3.0), ystar(1.0, 3.0, 4.0), M_level(1.0, 3.0, 4.0), y1, C0,
                                 c, bad)};
}

Verdict criterion9() {
  const Grid& g = grid255();
  const SobolevResult opt = sobolev_gamma(g, 3.0);
  const double d = d_level(opt.gamma, 3.0);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> modes(1, 10);
  double lowest = INFINITY;
  for (int i = 0; i < 500; ++i) {
    Field u(g.size());
    if (i % 3 == 0) {
      for (auto& x : u) x = n01(rng);
    } else {
      u.setZero();
      const int nm = modes(rng);
      for (int j = 1; j <= nm; ++j) u += n01(rng) * sine_mode(g, j);
    }
    lowest = std::min(lowest, mountain_pass_sup(g, u, 3.0));
  }
  const double at_opt = mountain_pass_sup(g, opt.maximizer, 3.0);
  const bool pass = lowest >= d - 1e-9 && std::abs(at_opt - d) <= 0.01 * d;
  return {pass, fmt("d=%.6g; min over 500 fields %.6g; at the maximizer %.6g (relative gap %.2e)", d, lowest, at_opt,
                    std::abs(at_opt - d) / d)};
}

Verdict criterion10() {
  int tracked = 0;
  bool pass = true;
  std::ostringstream os;
  for (const auto& r : positive_runs()) {
    if (!r.summary.monitors.persistence) continue;
    ++tracked;
    const bool held = *r.summary.monitors.persistence;
    pass = pass && held && r.summary.outcome.blew_up();
    os << fmt("[a=%.2g A=%.2f: %s] ", r.a, r.A, held ? "held at every step" : "violated");
  }
  if (tracked == 0) return {false, "no criterion-5 run satisfies the initial norm condition"};
  return {pass, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
  int failed = 0;
  for (const auto& [n, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail << std::endl;
  }
  std::cout << (10 - failed) << "/10 criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
