#include "viscowave/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace viscowave {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number()) fail(at(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(at(key), "must be finite");
    return x;
  }

  long long integer(const std::string& key, long long def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number_integer()) fail(at(key), "expected an integer");
    return v->get<long long>();
  }

  bool flag(const std::string& key, bool def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_string()) fail(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_array()) fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail(at(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ShapeSpec parse_shape(const json& j, const std::string& path, const Grid& grid) {
  Reader r(j, path);
  ShapeSpec s;
  const std::string kind = r.text("kind", "sine");
  if (kind == "zero") {
    s.kind = ShapeSpec::Kind::zero;
  } else if (kind == "sine") {
    s.kind = ShapeSpec::Kind::sine;
    auto modes = r.numbers("modes");
    if (!modes.empty() && static_cast<int>(modes.size()) != grid.dim())
      Reader::fail(r.at("modes"), "needs one entry per dimension");
    for (std::size_t d = 0; d < modes.size(); ++d) {
      if (modes[d] < 1 || modes[d] != std::floor(modes[d])) Reader::fail(r.at("modes"), "modes are positive integers");
      s.modes[d] = static_cast<int>(modes[d]);
    }
  } else if (kind == "bump") {
    s.kind = ShapeSpec::Kind::bump;
  } else if (kind == "values") {
    s.kind = ShapeSpec::Kind::values;
    s.values = r.numbers("values");
    if (static_cast<Eigen::Index>(s.values.size()) != grid.size())
      Reader::fail(r.at("values"), "needs one value per grid node (" + std::to_string(grid.size()) + ")");
  } else {
    Reader::fail(r.at("kind"), "unknown shape '" + kind + "'");
  }
  r.finish();
  return s;
}

HistoryProfile parse_profile(const json& j, const std::string& path) {
  Reader r(j, path);
  const std::string kind = r.text("kind", "constant");
  HistoryProfile p;
  if (kind == "constant") {
    p = HistoryProfile::constant();
  } else if (kind == "ramp") {
    p = HistoryProfile::ramp(r.number("epsilon", 0.0));
  } else if (kind == "oscillatory") {
    p = HistoryProfile::oscillatory(r.number("beta", 0.0), r.number("omega", 0.0));
  } else {
    Reader::fail(r.at("kind"), "unknown profile '" + kind + "'");
  }
  r.finish();
  try {
    p.validate();
  } catch (const std::exception& e) {
    Reader::fail(path, e.what());
  }
  return p;
}

Grid parse_grid(const json& j) {
  Reader r(j, "grid");
  const long long dim = r.integer("dim", 1);
  if (dim < 1 || dim > 3) Reader::fail("grid.dim", "must be 1, 2 or 3");
  auto extent = r.numbers("extent");
  auto nodes = r.numbers("nodes");
  if (extent.empty()) extent.assign(dim, 1.0);
  if (nodes.empty()) nodes.assign(dim, 255.0);
  if (static_cast<long long>(extent.size()) != dim) Reader::fail("grid.extent", "needs one entry per dimension");
  if (static_cast<long long>(nodes.size()) != dim) Reader::fail("grid.nodes", "needs one entry per dimension");
  std::array<double, 3> ext{1.0, 1.0, 1.0};
  std::array<int, 3> n{1, 1, 1};
  for (long long d = 0; d < dim; ++d) {
    ext[d] = extent[d];
    if (nodes[d] != std::floor(nodes[d])) Reader::fail("grid.nodes", "node counts are integers");
    n[d] = static_cast<int>(nodes[d]);
  }
  r.finish();
  try {
    return Grid(static_cast<int>(dim), ext, n);
  } catch (const std::exception& e) {
    Reader::fail("grid", e.what());
  }
}

KernelSpec parse_kernel(const json& j) {
  if (!j.is_array()) Reader::fail("kernel", "expected an array of {a, tau} modes");
  KernelSpec k;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Reader r(j[i], "kernel[" + std::to_string(i) + "]");
    PronyMode m{r.number("a", 0.0), r.number("tau", 0.0)};
    r.finish();
    k.modes.push_back(m);
  }
  const auto v = validate(k);
  if (!v.valid) Reader::fail("kernel", v.first_violation);
  return k;
}

}  // namespace

Field ShapeSpec::sample(const Grid& grid) const {
  switch (kind) {
    case Kind::zero:
      return grid.zeros();
    case Kind::values: {
      if (static_cast<Eigen::Index>(values.size()) != grid.size())
        throw std::invalid_argument("shape values do not match the grid");
      return Eigen::Map<const Field>(values.data(), grid.size());
    }
    case Kind::bump:
      return grid.sample([&](const std::array<double, 3>& x) {
        double v = 1.0;
        for (int d = 0; d < grid.dim(); ++d) {
          const double L = grid.extent(d);
          v *= 4.0 * x[d] * (L - x[d]) / (L * L);
        }
        return v;
      });
    case Kind::sine:
    default:
      return grid.sample([&](const std::array<double, 3>& x) {
        double v = 1.0;
        for (int d = 0; d < grid.dim(); ++d) v *= std::sin(modes[d] * M_PI * x[d] / grid.extent(d));
        return v;
      });
  }
}

ExperimentConfig parse_config(const json& doc) {
  Reader r(doc, "");
  ExperimentConfig c;
  c.source = doc;

  const json* version = r.find("schema_version");
  if (!version) Reader::fail("schema_version", "required");
  if (!version->is_number_integer() || version->get<long long>() != kSchemaVersion)
    Reader::fail("schema_version", "unsupported (expected " + std::to_string(kSchemaVersion) + ")");

  c.kind = r.text("kind", "run");
  static const std::set<std::string> kinds{"run", "check", "sweep", "compare-memory", "perturb"};
  if (!kinds.count(c.kind)) Reader::fail("kind", "unknown experiment kind '" + c.kind + "'");

  if (const json* g = r.find("grid")) c.grid = parse_grid(*g);
  if (const json* k = r.find("kernel")) c.kernel = parse_kernel(*k);

  if (const json* m = r.find("model")) {
    Reader mr(*m, "model");
    c.model.p = mr.number("p", c.model.p);
    c.model.m = mr.number("m", c.model.m);
    c.model.damping = mr.flag("damping", c.model.damping);
    c.model.source = mr.flag("source", c.model.source);
    c.model.allow_out_of_assumption = mr.flag("allow_out_of_assumption", c.model.allow_out_of_assumption);
    mr.finish();
    try {
      c.model.validate();
    } catch (const std::exception& e) {
      Reader::fail("model", e.what());
    }
  }

  if (const json* init = r.find("initial")) {
    Reader ir(*init, "initial");
    if (const json* s = ir.find("shape")) c.shape = parse_shape(*s, "initial.shape", c.grid);
    c.amplitude = ir.number("amplitude", c.amplitude);
    if (const json* p = ir.find("profile")) c.profile = parse_profile(*p, "initial.profile");
    if (const json* v = ir.find("velocity")) {
      Reader vr(*v, "initial.velocity");
      if (const json* s = vr.find("shape")) c.velocity_shape = parse_shape(*s, "initial.velocity.shape", c.grid);
      else c.velocity_shape = c.shape;
      c.velocity_amplitude = vr.number("amplitude", 0.0);
      vr.finish();
    }
    ir.finish();
  }

  const std::string mode = r.text("memory_mode", "prony");
  if (mode == "prony") c.memory_mode = MemoryMode::prony;
  else if (mode == "quadrature") c.memory_mode = MemoryMode::quadrature;
  else Reader::fail("memory_mode", "expected 'prony' or 'quadrature'");

  if (const json* s = r.find("step")) {
    Reader sr(*s, "step");
    c.step.cfl = sr.number("cfl", c.step.cfl);
    c.step.dt_max = sr.number("dt_max", c.step.dt_max);
    c.step.dt_min = sr.number("dt_min", c.step.dt_min);
    c.step.amplitude_safety = sr.number("amplitude_safety", c.step.amplitude_safety);
    c.step.blowup_max_abs = sr.number("blowup_max_abs", c.step.blowup_max_abs);
    c.step.blowup_h1 = sr.number("blowup_h1", c.step.blowup_h1);
    const std::string scheme = sr.text("damping_scheme", "verlet");
    if (scheme == "verlet") c.step.damping_scheme = DampingScheme::verlet;
    else if (scheme == "backward_euler") c.step.damping_scheme = DampingScheme::backward_euler;
    else Reader::fail("step.damping_scheme", "expected 'verlet' or 'backward_euler'");
    sr.finish();
    try {
      c.step.validate();
    } catch (const std::exception& e) {
      Reader::fail("step", e.what());
    }
  }

  if (const json* rec = r.find("recorder")) {
    Reader rr(*rec, "recorder");
    const long long cadence = rr.integer("cadence", 1);
    if (cadence < 1) Reader::fail("recorder.cadence", "must be >= 1");
    c.cadence = static_cast<int>(cadence);
    rr.finish();
  }

  c.horizon = r.number("horizon", c.horizon);
  if (!(c.horizon > 0.0)) Reader::fail("horizon", "must be positive");
  c.lyapunov = r.flag("lyapunov", c.lyapunov);
  c.track_constants = r.flag("track_constants", c.track_constants);

  if (const json* s = r.find("sobolev")) {
    Reader sr(*s, "sobolev");
    c.sobolev.random_seeds = static_cast<int>(sr.integer("random_seeds", c.sobolev.random_seeds));
    c.sobolev.max_iterations = static_cast<int>(sr.integer("max_iterations", c.sobolev.max_iterations));
    c.sobolev.tolerance = sr.number("tolerance", c.sobolev.tolerance);
    c.sobolev.window = static_cast<int>(sr.integer("window", c.sobolev.window));
    sr.finish();
    if (c.sobolev.random_seeds < 0 || c.sobolev.max_iterations < 1 || c.sobolev.window < 1 ||
        !(c.sobolev.tolerance > 0.0))
      Reader::fail("sobolev", "iteration settings must be positive");
  }

  if (const json* s = r.find("sweep")) {
    Reader sr(*s, "sweep");
    c.sweep.amplitudes = sr.numbers("amplitudes");
    const json* from = sr.find("from");
    const json* to = sr.find("to");
    const json* count = sr.find("count");
    if (from || to || count) {
      if (!c.sweep.amplitudes.empty()) Reader::fail("sweep", "give either 'amplitudes' or 'from'/'to'/'count'");
      if (!(from && to && count) || !from->is_number() || !to->is_number() || !count->is_number_integer())
        Reader::fail("sweep", "'from', 'to' (numbers) and 'count' (integer) go together");
      const double a = from->get<double>(), b = to->get<double>();
      const long long n = count->get<long long>();
      if (n < 2) Reader::fail("sweep.count", "must be >= 2");
      for (long long i = 0; i < n; ++i) c.sweep.amplitudes.push_back(a + (b - a) * double(i) / double(n - 1));
    }
    c.sweep.bisect = sr.flag("bisect", c.sweep.bisect);
    c.sweep.resolution = sr.number("resolution", c.sweep.resolution);
    if (!(c.sweep.resolution > 0.0)) Reader::fail("sweep.resolution", "must be positive");
    sr.finish();
  }

  if (const json* s = r.find("perturb")) {
    Reader pr(*s, "perturb");
    if (pr.find("deltas")) {
      c.perturb.deltas = pr.numbers("deltas");
      if (c.perturb.deltas.empty()) Reader::fail("perturb.deltas", "must not be empty");
    }
    c.perturb.sample_interval = pr.number("sample_interval", c.perturb.sample_interval);
    if (!(c.perturb.sample_interval > 0.0)) Reader::fail("perturb.sample_interval", "must be positive");
    pr.finish();
  }

  if (const json* s = r.find("drive")) {
    Reader dr(*s, "drive");
    c.drive.omega = dr.number("omega", c.drive.omega);
    c.drive.dt = dr.number("dt", c.drive.dt);
    if (!(c.drive.dt > 0.0)) Reader::fail("drive.dt", "must be positive");
    dr.finish();
  }

  const long long seed = r.integer("seed", 0);
  if (seed < 0) Reader::fail("seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.sobolev.seed = c.seed;
  r.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

InitialHistory initial_history(const ExperimentConfig& cfg, double amplitude) {
  InitialHistory h{amplitude * cfg.shape.sample(cfg.grid), cfg.profile, std::nullopt};
  if (cfg.velocity_shape) h.velocity = cfg.velocity_amplitude * cfg.velocity_shape->sample(cfg.grid);
  return h;
}

Assessment assess(const ExperimentConfig& cfg, double amplitude) {
  std::optional<double> gamma;
  const double p = cfg.model.p;
  if (cfg.model.source && p > 1.0 && p <= 5.0) gamma = sobolev_gamma(cfg.grid, p, cfg.sobolev).gamma;
  return assess(cfg, amplitude, gamma);
}

Assessment assess(const ExperimentConfig& cfg, double amplitude, std::optional<double> gamma) {
  Assessment a;
  const State s = initial_state(cfg.grid, initial_history(cfg, amplitude), cfg.model, cfg.kernel, cfg.memory_mode);
  a.initial = report(s, cfg.model, cfg.kernel, EnergyAccumulators{});
  a.gamma = gamma;
  if (!cfg.model.source) {
    a.notes.push_back("source disabled: blow-up criteria not evaluated");
    return a;
  }
  if (!gamma) {
    a.notes.push_back("Sobolev constant not computed for this p; blow-up criteria not evaluated");
    return a;
  }
  const InitialEnergetics init{a.initial.totalE, a.initial.scriptE, a.initial.lp_power, a.initial.grad_squared};
  a.criteria = check_hypotheses(cfg.model, cfg.kernel, *gamma, init);
  const CriteriaReport& cr = *a.criteria;

  if (!(cr.hyp.p_gt_m && cr.hyp.p_gt_sqrtk0)) return a;
  ProofInputs in;
  in.params = cfg.model;
  in.k0 = cr.k0;
  in.Nprime0 = a.initial.Nprime;
  if (cfg.track_constants) in.domain_measure = cfg.grid.measure();
  double shift = 0.0;
  if (cr.hyp.E0_negative) {
    in.path = BlowupPath::negative_energy;
    in.G0 = -cr.initial.E0;
  } else if (cr.hyp.positive_energy_blowup() && cr.c && *cr.c > 0.0) {
    in.path = BlowupPath::positive_energy;
    in.G0 = cr.M - cr.initial.E0;
    in.c = cr.c;
    shift = cr.M;
  } else {
    return a;
  }
  try {
    a.proof = proof_parameters(in);
  } catch (const std::invalid_argument& e) {
    a.notes.push_back(std::string("proof parameters unavailable: ") + e.what());
    return a;
  }
  if (cfg.lyapunov) a.lyapunov = LyapunovParams{a.proof->alpha, a.proof->epsilon, shift};
  return a;
}

void RunMonitors::observe(const EnergyReport& prev, const EnergyReport& now, const Assessment& a) {
  ++steps_observed;
  if (prev.G != 0.0) max_G_drop = std::max(max_G_drop, (prev.G - now.G) / std::abs(prev.G));
  if (prev.totalE != 0.0) max_totalE_rise = std::max(max_totalE_rise, (now.totalE - prev.totalE) / std::abs(prev.totalE));
  if (a.initial.scriptE > 0.0) max_scriptE_ratio = std::max(max_scriptE_ratio, now.scriptE / a.initial.scriptE);
  if (now.damping_cum < prev.damping_cum || now.memory_cum < prev.memory_cum) dissipation_monotone = false;
  if (Y_nonincreasing_steps && !(now.Y > prev.Y)) ++*Y_nonincreasing_steps;
  if (min_scriptE_over_y1) min_scriptE_over_y1 = std::min(*min_scriptE_over_y1, now.scriptE / *a.criteria->y1);
  if (min_lp_over_C0) min_lp_over_C0 = std::min(*min_lp_over_C0, now.lp_power / *a.criteria->C0);
  if (persistence) persistence = *persistence && now.lp_power > now.grad_squared;
}

RunArtifacts execute_run(const ExperimentConfig& cfg) { return execute_run(cfg, cfg.amplitude); }

RunArtifacts execute_run(const ExperimentConfig& cfg, double amplitude, const StepObserver& extra) {
  const auto start = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.assessment = assess(cfg, amplitude);
  const Assessment& a = summary.assessment;

  RunMonitors& mon = summary.monitors;
  if (a.lyapunov) mon.Y_nonincreasing_steps = 0;
  if (a.criteria && a.criteria->hyp.positive_energy_blowup() && a.criteria->y1) {
    mon.min_scriptE_over_y1 = a.initial.scriptE / *a.criteria->y1;
    mon.min_lp_over_C0 = a.initial.lp_power / *a.criteria->C0;
  }
  if (a.initial.lp_power > a.initial.grad_squared) mon.persistence = true;

  State state = initial_state(cfg.grid, initial_history(cfg, amplitude), cfg.model, cfg.kernel, cfg.memory_mode);
  EnergyRecorder rec(cfg.model, cfg.kernel, cfg.cadence, a.lyapunov);
  EnergyReport prev;
  auto observer = [&](const State& st) {
    rec.observe(st);
    if (st.step_count > 0) mon.observe(prev, rec.last(), a);
    prev = rec.last();
    if (extra) extra(st);
  };
  summary.outcome = run(state, cfg.model, cfg.kernel, cfg.step, RunOptions{cfg.horizon, 0.0}, observer);
  rec.finish();
  summary.final_report = rec.last();
  summary.numerical_fault = summary.outcome.event && summary.outcome.event->non_finite;
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return RunArtifacts{std::move(summary), rec.reports(), std::move(state)};
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

SweepRow sweep_row(const ExperimentConfig& cfg, double amplitude, std::optional<double> gamma) {
  const Assessment a = assess(cfg, amplitude, gamma);
  State s = initial_state(cfg.grid, initial_history(cfg, amplitude), cfg.model, cfg.kernel, cfg.memory_mode);
  const RunOutcome out = run(s, cfg.model, cfg.kernel, cfg.step, RunOptions{cfg.horizon, 0.0});
  SweepRow row;
  row.amplitude = amplitude;
  row.blew_up = out.blew_up();
  row.t_final = out.t_final;
  row.t_obs = out.blew_up() ? out.t_obs : std::numeric_limits<double>::quiet_NaN();
  row.E0 = a.initial.totalE;
  row.scriptE0 = a.initial.scriptE;
  if (a.criteria) row.hyp = a.criteria->hyp;
  return row;
}

}  // namespace

SweepResult sweep_amplitude(const ExperimentConfig& cfg, int threads) {
  if (cfg.sweep.amplitudes.empty()) throw ConfigError("sweep: no amplitudes given");
  SweepResult res;
  if (cfg.model.source && cfg.model.p > 1.0 && cfg.model.p <= 5.0)
    res.gamma = sobolev_gamma(cfg.grid, cfg.model.p, cfg.sobolev).gamma;

  std::vector<double> amps = cfg.sweep.amplitudes;
  std::sort(amps.begin(), amps.end());
  amps.erase(std::unique(amps.begin(), amps.end()), amps.end());
  res.rows.resize(amps.size());
  parallel_for(amps.size(), threads, [&](std::size_t i) { res.rows[i] = sweep_row(cfg, amps[i], res.gamma); });

  auto first_blowup = [&]() -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < res.rows.size(); ++i)
      if (res.rows[i].blew_up) return i;
    return std::nullopt;
  };

  if (cfg.sweep.bisect) {
    const auto b = first_blowup();
    if (!b || *b == 0)
      throw std::runtime_error("sweep: bisection needs a completed row below a blown-up row; both ends agree");
    double lo = res.rows[*b - 1].amplitude, hi = res.rows[*b].amplitude;
    while (hi - lo > cfg.sweep.resolution) {
      const double mid = 0.5 * (lo + hi);
      SweepRow row = sweep_row(cfg, mid, res.gamma);
      (row.blew_up ? hi : lo) = mid;
      res.rows.push_back(row);
    }
    std::sort(res.rows.begin(), res.rows.end(),
              [](const SweepRow& x, const SweepRow& y) { return x.amplitude < y.amplitude; });
    res.threshold = std::make_pair(lo, hi);
  }

  for (std::size_t i = 0; i + 1 < res.rows.size(); ++i) {
    if (res.rows[i].E0 >= 0.0 && res.rows[i + 1].E0 < 0.0) {
      res.energy_sign_change = i;
      break;
    }
  }
  if (const auto b = first_blowup())
    for (std::size_t i = *b; i < res.rows.size(); ++i) res.monotone_tail = res.monotone_tail && res.rows[i].blew_up;
  return res;
}

MemoryComparison compare_memory(const ExperimentConfig& cfg) {
  if (cfg.kernel.empty()) throw ConfigError("compare-memory needs a non-empty kernel");
  const Grid& g = cfg.grid;
  const Field phi = cfg.amplitude * cfg.shape.sample(g);
  const double phi_sq = inner_l2(g, phi, phi);
  if (!(phi_sq > 0.0)) throw ConfigError("compare-memory needs a nonzero initial shape");
  const InitialHistory rest{g.zeros(), HistoryProfile::constant(), std::nullopt};
  MemoryState prony(MemoryMode::prony, g, cfg.kernel, rest);
  MemoryState quad(MemoryMode::quadrature, g, cfg.kernel, rest);
  const Field lap_phi = laplacian(g, phi);

  struct Raw {
    double force_pq, conv_p, conv_q, hist_pq, force_ref, conv_ref, hist_ref;
  };
  std::vector<Raw> raw;
  MemoryComparison out;
  const double dt = cfg.drive.dt, omega = cfg.drive.omega;
  const long n = static_cast<long>(std::ceil(cfg.horizon / dt - 1e-9));
  for (long k = 1; k <= n; ++k) {
    const double t = k * dt;
    const Field u = std::sin(omega * t) * phi;
    const double grad2 = inner_grad(g, u, u);
    prony.advance(cfg.kernel, u, grad2, dt);
    quad.advance(cfg.kernel, u, grad2, dt);

    const double exact = driven_sine_convolution(cfg.kernel, omega, t);
    const Field cp = prony.convolution(cfg.kernel), cq = quad.convolution(cfg.kernel);
    const Field fp = prony.force(cfg.kernel), fq = quad.force(cfg.kernel);
    const double hp = history_energy(prony, cfg.kernel, u), hq = history_energy(quad, cfg.kernel, u);
    raw.push_back({(fp - fq).cwiseAbs().maxCoeff(), (cp - exact * phi).cwiseAbs().maxCoeff(),
                   (cq - exact * phi).cwiseAbs().maxCoeff(), std::abs(hp - hq),
                   std::abs(exact) * lap_phi.cwiseAbs().maxCoeff(), std::abs(exact) * phi.cwiseAbs().maxCoeff(),
                   std::max(std::abs(hp), std::abs(hq))});
    MemoryComparison::Row row{};
    row.t = t;
    row.conv_prony = inner_l2(g, cp, phi) / phi_sq;
    row.conv_quadrature = inner_l2(g, cq, phi) / phi_sq;
    row.conv_analytic = exact;
    row.history_prony = hp;
    row.history_quadrature = hq;
    out.rows.push_back(row);
  }
  // Discrepancies are measured against the largest reference magnitude over
  // the run, so zero crossings of the drive do not inflate them.
  double force_scale = 0.0, conv_scale = 0.0, hist_scale = 0.0;
  for (const auto& r : raw) {
    force_scale = std::max(force_scale, r.force_ref);
    conv_scale = std::max(conv_scale, r.conv_ref);
    hist_scale = std::max(hist_scale, r.hist_ref);
  }
  auto rel = [](double x, double scale) { return scale > 0.0 ? x / scale : x; };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& row = out.rows[i];
    row.force_diff = rel(raw[i].force_pq, force_scale);
    row.conv_diff_prony = rel(raw[i].conv_p, conv_scale);
    row.conv_diff_quadrature = rel(raw[i].conv_q, conv_scale);
    row.history_diff = rel(raw[i].hist_pq, hist_scale);
    out.max_force_diff = std::max(out.max_force_diff, row.force_diff);
    out.max_history_diff = std::max(out.max_history_diff, row.history_diff);
    out.max_prony_vs_analytic = std::max(out.max_prony_vs_analytic, row.conv_diff_prony);
    out.max_quadrature_vs_analytic = std::max(out.max_quadrature_vs_analytic, row.conv_diff_quadrature);
  }
  return out;
}

namespace {

struct SampledPath {
  std::vector<Field> u;
  bool blew_up = false;
};

SampledPath sampled_path(const ExperimentConfig& cfg, double scale) {
  InitialHistory h = initial_history(cfg, cfg.amplitude);
  h.shape *= scale;
  if (h.velocity) *h.velocity *= scale;
  State s = initial_state(cfg.grid, h, cfg.model, cfg.kernel, cfg.memory_mode);
  SampledPath path;
  const double dt_s = cfg.perturb.sample_interval;
  auto observer = [&](const State& st) {
    const double k = std::round(st.t / dt_s);
    if (std::abs(st.t - k * dt_s) <= 1e-9 * std::max(1.0, st.t) || st.t >= cfg.horizon * (1.0 - 1e-12))
      if (path.u.size() <= static_cast<std::size_t>(k)) path.u.push_back(st.u);
  };
  const RunOutcome out = run(s, cfg.model, cfg.kernel, cfg.step, RunOptions{cfg.horizon, dt_s}, observer);
  path.blew_up = out.blew_up();
  return path;
}

}  // namespace

PerturbResult perturb(const ExperimentConfig& cfg, int threads) {
  const SampledPath base = sampled_path(cfg, 1.0);
  if (base.blew_up) throw std::runtime_error("perturb: base run blows up before the horizon");
  PerturbResult res;
  for (const auto& u : base.u) res.base_sup = std::max(res.base_sup, h1_seminorm(cfg.grid, u));

  res.rows.resize(cfg.perturb.deltas.size());
  parallel_for(res.rows.size(), threads, [&](std::size_t i) {
    const double delta = cfg.perturb.deltas[i];
    PerturbRow& row = res.rows[i];
    row.delta = delta;
    const SampledPath p = delta == 0.0 ? base : sampled_path(cfg, 1.0 + delta);
    if (p.blew_up || p.u.size() != base.u.size()) {
      row.sup_diff = row.relative = std::numeric_limits<double>::infinity();
      return;
    }
    for (std::size_t k = 0; k < base.u.size(); ++k)
      row.sup_diff = std::max(row.sup_diff, h1_seminorm(cfg.grid, Field(p.u[k] - base.u[k])));
    row.relative = res.base_sup > 0.0 ? row.sup_diff / res.base_sup : row.sup_diff;
  });

  std::vector<PerturbRow> sorted = res.rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const PerturbRow& a, const PerturbRow& b) { return std::abs(a.delta) < std::abs(b.delta); });
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    res.monotone = res.monotone && sorted[i].relative <= sorted[i + 1].relative;
  return res;
}

CsvValidation validate_energy_csv(std::istream& in) {
  CsvValidation v;
  auto violation = [&](long row, const std::string& what) {
    if (v.violations.size() < 50) v.violations.push_back("row " + std::to_string(row) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) {
    v.violations.push_back("empty file");
    return v;
  }
  {
    std::string expected;
    for (std::size_t i = 0; i < kEnergyColumns.size(); ++i) expected += (i ? "," : "") + std::string(kEnergyColumns[i]);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected) {
      v.violations.push_back("header mismatch: expected '" + expected + "'");
      return v;
    }
  }
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a) + std::abs(b)); };
  std::array<double, 14> prev{};
  double e0 = 0.0;
  long row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::array<double, 14> x{};
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    bool parsed = true;
    while (std::getline(ss, cell, ',')) {
      if (k >= x.size()) {
        parsed = false;
        break;
      }
      try {
        x[k++] = std::stod(cell);
      } catch (const std::exception&) {
        parsed = false;
        break;
      }
    }
    if (!parsed || k != x.size()) {
      violation(row, "expected 14 numeric fields");
      continue;
    }
    const auto [t, kin, ela, his, sE, pot, tot, G, N, Np, dcum, mcum, res, Y] = x;
    (void)Np;
    (void)Y;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
      if (!std::isfinite(x[i])) violation(row, std::string(kEnergyColumns[i]) + " is not finite");
    if (row == 1) e0 = tot;
    if (kin < 0.0 || ela < 0.0 || N < 0.0) violation(row, "negative kinetic, elastic or N");
    if (his < -1e-12 * (1.0 + sE)) violation(row, "negative history energy");
    if (!close(sE, kin + ela + his)) violation(row, "scriptE != kinetic + elastic + history");
    if (!close(tot, sE - pot)) violation(row, "totalE != scriptE - potential");
    if (!close(G, -tot)) violation(row, "G != -totalE");
    if (dcum < 0.0 || mcum < 0.0) violation(row, "negative cumulative dissipation");
    if (!close(res, tot + dcum + mcum - e0)) violation(row, "identity_residual inconsistent with its terms");
    if (row > 1) {
      if (!(t > prev[0])) violation(row, "time not increasing");
      if (dcum < prev[10] || mcum < prev[11]) violation(row, "cumulative dissipation decreased");
    }
    prev = x;
  }
  v.rows = row;
  if (row == 0) v.violations.push_back("no data rows");
  return v;
}

namespace {

std::string yes(bool b) { return b ? "true" : "false"; }
std::string applies(bool b) { return b ? "applies" : "does_not_apply"; }

void put(std::ostream& os, const std::string& key, double x) {
  os << key << '=';
  if (std::isfinite(x)) os << std::setprecision(12) << x;
  else os << "nan";
  os << '\n';
}

}  // namespace

void write_criteria(std::ostream& os, const Assessment& a) {
  put(os, "E0", a.initial.totalE);
  put(os, "scriptE0", a.initial.scriptE);
  put(os, "lp_power0", a.initial.lp_power);
  put(os, "grad_squared0", a.initial.grad_squared);
  put(os, "Nprime0", a.initial.Nprime);
  os << "E0_sign=" << (a.initial.totalE < 0.0 ? "negative" : "nonnegative") << '\n';
  if (a.gamma) put(os, "gamma", *a.gamma);
  if (a.criteria) {
    const CriteriaReport& c = *a.criteria;
    put(os, "p", c.p);
    put(os, "m", c.m);
    put(os, "k0", c.k0);
    put(os, "y0", c.y0);
    put(os, "d", c.d);
    put(os, "ystar", c.ystar);
    put(os, "M", c.M);
    if (c.y1) put(os, "y1", *c.y1);
    if (c.C0) put(os, "C0", *c.C0);
    if (c.c) put(os, "c", *c.c);
    const Hypotheses& h = c.hyp;
    os << "within_assumption=" << yes(h.within_assumption) << '\n'
       << "p_gt_m=" << yes(h.p_gt_m) << '\n'
       << "p_gt_sqrt_k0=" << yes(h.p_gt_sqrtk0) << '\n'
       << "E0_negative=" << yes(h.E0_negative) << '\n'
       << "E0_in_0_M=" << yes(h.E0_below_M) << '\n'
       << "scriptE0_above_y0=" << yes(h.scriptE0_above_y0) << '\n'
       << "lp_power_exceeds_grad_squared=" << yes(h.corollary_condition) << '\n'
       << "m_ge_p=" << yes(h.m_ge_p) << '\n'
       << "negative_energy_blowup=" << applies(h.negative_energy_blowup()) << '\n'
       << "positive_energy_blowup=" << applies(h.positive_energy_blowup()) << '\n'
       << "norm_condition_blowup=" << applies(h.corollary_blowup()) << '\n'
       << "global_existence=" << applies(h.global_existence()) << '\n'
       << "consistency_error=" << yes(c.consistency_error) << '\n';
    for (std::size_t i = 0; i < c.notes.size(); ++i) os << "criteria_note_" << i << '=' << c.notes[i] << '\n';
  }
  if (a.proof) {
    const ProofParameters& pp = *a.proof;
    os << "lyapunov_path=" << (pp.path == BlowupPath::negative_energy ? "negative_energy" : "positive_energy") << '\n';
    put(os, "delta", pp.delta);
    put(os, "alpha", pp.alpha);
    put(os, "alpha_limit_damping", pp.alpha_limit_damping);
    put(os, "alpha_limit_source", pp.alpha_limit_source);
    put(os, "sigma", pp.sigma);
    put(os, "lambda", pp.lambda);
    put(os, "epsilon", pp.epsilon);
    for (std::size_t i = 0; i < pp.epsilon_constraints.size(); ++i) {
      os << "epsilon_constraint_" << i << '=' << pp.epsilon_constraints[i].expression << '\n';
      put(os, "epsilon_constraint_" + std::to_string(i) + "_bound", pp.epsilon_constraints[i].bound);
    }
    os << "constants_tracked=" << yes(pp.constants_tracked) << '\n';
    if (pp.constants_tracked) put(os, "C_lambda", pp.C_lambda);
    if (pp.Tmax_bound) put(os, "Tmax_bound", *pp.Tmax_bound);
    os << "Tmax_note=" << pp.Tmax_note << '\n';
  }
  for (std::size_t i = 0; i < a.notes.size(); ++i) os << "note_" << i << '=' << a.notes[i] << '\n';
}

void write_summary(std::ostream& os, const ExperimentConfig& cfg, const RunSummary& s) {
  const RunOutcome& o = s.outcome;
  os << "version=" << kVersion << '\n' << "schema_version=" << kSchemaVersion << '\n' << "kind=" << cfg.kind << '\n';
  os << "outcome=" << (s.numerical_fault ? "numerical_fault" : o.blew_up() ? "blew_up" : "completed") << '\n';
  put(os, "t_final", o.t_final);
  os << "steps=" << o.steps << '\n';
  if (o.blew_up()) {
    put(os, "t_obs", o.t_obs);
    put(os, "rate_exponent", o.rate_exponent);
    os << "blowup_reason=" << o.event->describe() << '\n';
  }
  put(os, "E0", s.assessment.initial.totalE);
  put(os, "scriptE0", s.assessment.initial.scriptE);
  const EnergyReport& f = s.final_report;
  put(os, "final_scriptE", f.scriptE);
  put(os, "final_totalE", f.totalE);
  put(os, "final_G", f.G);
  put(os, "final_max_abs", f.max_abs);
  put(os, "final_damping_cum", f.damping_cum);
  put(os, "final_memory_cum", f.memory_cum);
  put(os, "final_identity_residual", f.identity_residual);
  const RunMonitors& m = s.monitors;
  put(os, "max_G_drop", m.max_G_drop);
  put(os, "max_totalE_rise", m.max_totalE_rise);
  put(os, "max_scriptE_ratio", m.max_scriptE_ratio);
  os << "dissipation_monotone=" << yes(m.dissipation_monotone) << '\n';
  if (m.Y_nonincreasing_steps) os << "Y_nonincreasing_steps=" << *m.Y_nonincreasing_steps << '\n';
  if (m.min_scriptE_over_y1) put(os, "min_scriptE_over_y1", *m.min_scriptE_over_y1);
  if (m.min_lp_over_C0) put(os, "min_lp_power_over_C0", *m.min_lp_over_C0);
  if (m.persistence) os << "lp_power_exceeds_grad_squared_throughout=" << yes(*m.persistence) << '\n';
  if (!cfg.model.within_assumption()) os << "out_of_assumption=true\n";
  if (s.assessment.criteria) {
    const Hypotheses& h = s.assessment.criteria->hyp;
    const bool predicts_blowup = h.negative_energy_blowup() || h.positive_energy_blowup() || h.corollary_blowup();
    os << "predicted=" << (predicts_blowup ? "blow_up" : h.global_existence() ? "global" : "none") << '\n';
  }
  put(os, "wall_seconds", s.wall_seconds);
  os << "seed=" << cfg.seed << '\n';
  os << "config=" << cfg.source.dump() << '\n';
}

void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  os << "amplitude,outcome,t_final,t_obs,E0,scriptE0,E0_negative,E0_in_0_M,scriptE0_above_y0,"
        "negative_energy_blowup,positive_energy_blowup,norm_condition_blowup,global_existence\n";
  os << std::setprecision(12);
  for (const auto& row : r.rows) {
    const Hypotheses& h = row.hyp;
    os << row.amplitude << ',' << (row.blew_up ? "blew_up" : "completed") << ',' << row.t_final << ',';
    if (std::isfinite(row.t_obs)) os << row.t_obs;
    else os << "nan";
    os << ',' << row.E0 << ',' << row.scriptE0 << ',' << h.E0_negative << ',' << h.E0_below_M << ','
       << h.scriptE0_above_y0 << ',' << h.negative_energy_blowup() << ',' << h.positive_energy_blowup() << ','
       << h.corollary_blowup() << ',' << h.global_existence() << '\n';
  }
}

void write_sweep_summary(std::ostream& os, const ExperimentConfig& cfg, const SweepResult& r) {
  os << "version=" << kVersion << '\n' << "kind=sweep\n" << "rows=" << r.rows.size() << '\n';
  if (r.gamma) put(os, "gamma", *r.gamma);
  if (r.threshold) {
    put(os, "threshold_completed", r.threshold->first);
    put(os, "threshold_blew_up", r.threshold->second);
  }
  if (r.energy_sign_change) {
    put(os, "E0_sign_change_after", r.rows[*r.energy_sign_change].amplitude);
    put(os, "E0_sign_change_before", r.rows[*r.energy_sign_change + 1].amplitude);
  }
  os << "monotone_tail=" << yes(r.monotone_tail) << '\n';
  os << "seed=" << cfg.seed << '\n' << "config=" << cfg.source.dump() << '\n';
}

void write_memory_csv(std::ostream& os, const MemoryComparison& c) {
  os << "t,conv_prony,conv_quadrature,conv_analytic,force_diff,conv_diff_prony,conv_diff_quadrature,"
        "history_prony,history_quadrature,history_diff\n";
  os << std::setprecision(15);
  for (const auto& r : c.rows)
    os << r.t << ',' << r.conv_prony << ',' << r.conv_quadrature << ',' << r.conv_analytic << ',' << r.force_diff << ','
       << r.conv_diff_prony << ',' << r.conv_diff_quadrature << ',' << r.history_prony << ',' << r.history_quadrature
       << ',' << r.history_diff << '\n';
}

void write_perturb_csv(std::ostream& os, const PerturbResult& r) {
  os << "delta,sup_grad_diff,relative\n" << std::setprecision(15);
  for (const auto& row : r.rows) os << row.delta << ',' << row.sup_diff << ',' << row.relative << '\n';
}

int resolve_threads(std::optional<int> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("VISCOWAVE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

}  // namespace

int run_cli(const ExperimentConfig& cfg_in, const std::string& kind_in, const std::filesystem::path& out_dir,
            int threads, std::ostream& log) {
  ExperimentConfig cfg = cfg_in;
  if (!kind_in.empty()) cfg.kind = kind_in;
  std::filesystem::create_directories(out_dir);
  const std::string& kind = cfg.kind;

  if (kind == "run") {
    RunArtifacts art = execute_run(cfg);
    {
      auto f = open_out(out_dir / "energy.csv");
      write_energy_csv_header(f);
      for (const auto& r : art.reports) write_energy_csv_row(f, r);
    }
    {
      auto f = open_out(out_dir / "summary.txt");
      write_summary(f, cfg, art.summary);
    }
    {
      auto f = open_out(out_dir / "criteria.txt");
      write_criteria(f, art.summary.assessment);
    }
    {
      auto f = open_out(out_dir / "field_final.csv");
      write_field_csv(f, cfg.grid, art.final_state.u);
    }
    const RunOutcome& o = art.summary.outcome;
    log << (o.blew_up() ? "blew_up" : "completed") << " t=" << o.t_final << " steps=" << o.steps;
    if (o.event) log << " (" << o.event->describe() << ")";
    log << '\n';
    if (art.summary.numerical_fault) {
      log << "numerical fault: non-finite state before any blow-up threshold\n";
      return 3;
    }
    if (!art.summary.monitors.dissipation_monotone) {
      log << "invariant violated: cumulative dissipation decreased\n";
      return 1;
    }
    return 0;
  }
  if (kind == "check") {
    const Assessment a = assess(cfg, cfg.amplitude);
    auto f = open_out(out_dir / "summary.txt");
    f << "version=" << kVersion << '\n' << "kind=check\n";
    write_criteria(f, a);
    f << "seed=" << cfg.seed << '\n' << "config=" << cfg.source.dump() << '\n';
    auto c = open_out(out_dir / "criteria.txt");
    write_criteria(c, a);
    log << "E0=" << a.initial.totalE << " scriptE0=" << a.initial.scriptE << '\n';
    return 0;
  }
  if (kind == "sweep") {
    const SweepResult r = sweep_amplitude(cfg, threads);
    auto f = open_out(out_dir / "sweep.csv");
    write_sweep_csv(f, r);
    auto s = open_out(out_dir / "summary.txt");
    write_sweep_summary(s, cfg, r);
    log << r.rows.size() << " sweep rows";
    if (r.threshold) log << ", threshold in [" << r.threshold->first << ", " << r.threshold->second << "]";
    log << '\n';
    return 0;
  }
  if (kind == "compare-memory") {
    const MemoryComparison c = compare_memory(cfg);
    auto f = open_out(out_dir / "memory_compare.csv");
    write_memory_csv(f, c);
    auto s = open_out(out_dir / "summary.txt");
    s << "version=" << kVersion << '\n' << "kind=compare-memory\n";
    put(s, "max_force_discrepancy", c.max_force_diff);
    put(s, "max_history_energy_discrepancy", c.max_history_diff);
    put(s, "max_prony_vs_analytic", c.max_prony_vs_analytic);
    put(s, "max_quadrature_vs_analytic", c.max_quadrature_vs_analytic);
    s << "config=" << cfg.source.dump() << '\n';
    log << "max relative discrepancy: force " << c.max_force_diff << ", history energy " << c.max_history_diff << '\n';
    return 0;
  }
  if (kind == "perturb") {
    const PerturbResult r = perturb(cfg, threads);
    auto f = open_out(out_dir / "perturb.csv");
    write_perturb_csv(f, r);
    auto s = open_out(out_dir / "summary.txt");
    s << "version=" << kVersion << '\n' << "kind=perturb\n";
    put(s, "base_sup_grad", r.base_sup);
    s << "monotone_in_delta=" << yes(r.monotone) << '\n' << "config=" << cfg.source.dump() << '\n';
    for (const auto& row : r.rows) log << "delta=" << row.delta << " relative=" << row.relative << '\n';
    return 0;
  }
  throw ConfigError("kind: unknown experiment kind '" + kind + "'");
}

}  // namespace viscowave
