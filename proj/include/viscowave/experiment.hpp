#pragma once

#include "viscowave/criteria.hpp"
#include "viscowave/dynamics.hpp"
#include "viscowave/energy.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace viscowave {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

/// Malformed or out-of-range configuration. Maps to exit status 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite state that no blow-up threshold caught. Maps to exit status 3.
struct NumericalFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Spatial profile of the initial displacement or velocity.
struct ShapeSpec {
  enum class Kind { zero, sine, bump, values };
  Kind kind = Kind::sine;
  std::array<int, 3> modes{1, 1, 1};  // sine: prod_d sin(k_d pi x_d / L_d)
  std::vector<double> values;         // values: one entry per node, row-major

  Field sample(const Grid& grid) const;
};

struct SweepSpec {
  std::vector<double> amplitudes;
  bool bisect = false;
  double resolution = 1e-3;
};

struct PerturbSpec {
  std::vector<double> deltas{1e-2, 5e-3, 2.5e-3};
  double sample_interval = 0.05;
};

struct DriveSpec {
  double omega = 1.0;
  double dt = 1e-3;
};

struct ExperimentConfig {
  std::string kind = "run";
  Grid grid = Grid::interval(1.0, 255);
  KernelSpec kernel;
  ModelParams model;
  ShapeSpec shape;
  double amplitude = 1.0;
  HistoryProfile profile;
  std::optional<ShapeSpec> velocity_shape;
  double velocity_amplitude = 0.0;
  MemoryMode memory_mode = MemoryMode::prony;
  StepControl step;
  int cadence = 1;
  double horizon = 1.0;
  bool lyapunov = true;
  /// Instantiate the Holder/Young constants on the box domain for the T_max bound.
  bool track_constants = true;
  SobolevOptions sobolev;
  SweepSpec sweep;
  PerturbSpec perturb;
  DriveSpec drive;
  std::uint64_t seed = 0;
  nlohmann::json source;  // the document as given
};

/// Validates against the schema; unknown keys are errors.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

InitialHistory initial_history(const ExperimentConfig& cfg, double amplitude);

/// Discrete Sobolev constant, hypothesis checks and proof parameters at t = 0.
struct Assessment {
  EnergyReport initial;
  std::optional<double> gamma;
  std::optional<CriteriaReport> criteria;
  std::optional<ProofParameters> proof;
  std::optional<LyapunovParams> lyapunov;
  std::vector<std::string> notes;
};

Assessment assess(const ExperimentConfig& cfg, double amplitude);
/// Same, with gamma supplied (sweeps compute it once).
Assessment assess(const ExperimentConfig& cfg, double amplitude, std::optional<double> gamma);

/// Running checks of the properties the theory predicts along a run.
struct RunMonitors {
  long steps_observed = 0;
  double max_G_drop = 0.0;        // max over steps of (G_prev - G) / |G_prev|
  double max_totalE_rise = 0.0;   // max over steps of (E - E_prev) / |E_prev|
  double max_scriptE_ratio = 1.0;  // sup scriptE(t) / scriptE(0)
  bool dissipation_monotone = true;
  std::optional<long> Y_nonincreasing_steps;
  std::optional<double> min_scriptE_over_y1;
  std::optional<double> min_lp_over_C0;
  /// |u|_{p+1}^{p+1} > |grad u|_2^2 at every step (tracked when it holds at t = 0).
  std::optional<bool> persistence;

  void observe(const EnergyReport& prev, const EnergyReport& now, const Assessment& a);
};

struct RunSummary {
  RunOutcome outcome;
  Assessment assessment;
  EnergyReport final_report;
  RunMonitors monitors;
  double wall_seconds = 0.0;
  bool numerical_fault = false;
};

struct RunArtifacts {
  RunSummary summary;
  std::vector<EnergyReport> reports;
  State final_state;
};

RunArtifacts execute_run(const ExperimentConfig& cfg);
RunArtifacts execute_run(const ExperimentConfig& cfg, double amplitude, const StepObserver& extra = {});

struct SweepRow {
  double amplitude = 0.0;
  bool blew_up = false;
  double t_final = 0.0;
  double t_obs = 0.0;
  double E0 = 0.0;
  double scriptE0 = 0.0;
  Hypotheses hyp;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by amplitude, bisection points included
  std::optional<double> gamma;
  std::optional<std::pair<double, double>> threshold;  // completed / blew-up bracket
  /// Index i such that E0 changes sign between rows i and i+1.
  std::optional<std::size_t> energy_sign_change;
  /// Every amplitude above the smallest blow-up in the table also blew up.
  bool monotone_tail = true;
};

SweepResult sweep_amplitude(const ExperimentConfig& cfg, int threads);

struct MemoryComparison {
  struct Row {
    double t;
    double conv_prony, conv_quadrature, conv_analytic;  // coefficient on the driven mode
    double force_diff, conv_diff_prony, conv_diff_quadrature, history_diff;  // relative
    double history_prony, history_quadrature;
  };
  std::vector<Row> rows;
  double max_force_diff = 0.0;     // Prony vs quadrature
  double max_history_diff = 0.0;   // Prony vs quadrature
  double max_prony_vs_analytic = 0.0;
  double max_quadrature_vs_analytic = 0.0;
};

/// Drives both memory representations with u = phi sin(omega t), zero past history.
MemoryComparison compare_memory(const ExperimentConfig& cfg);

struct PerturbRow {
  double delta = 0.0;
  double sup_diff = 0.0;  // sup_t |grad(u_delta - u)|_2
  double relative = 0.0;  // sup_diff / sup_t |grad u|_2
};

struct PerturbResult {
  std::vector<PerturbRow> rows;  // in the order given
  double base_sup = 0.0;
  bool monotone = true;  // relative difference increases with delta
};

PerturbResult perturb(const ExperimentConfig& cfg, int threads);

struct CsvValidation {
  long rows = 0;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Re-checks the energy CSV invariants row by row.
CsvValidation validate_energy_csv(std::istream& in);

/// Writers; `key=value` lines, CSV with a header.
void write_summary(std::ostream& os, const ExperimentConfig& cfg, const RunSummary& s);
void write_criteria(std::ostream& os, const Assessment& a);
void write_sweep_csv(std::ostream& os, const SweepResult& r);
void write_sweep_summary(std::ostream& os, const ExperimentConfig& cfg, const SweepResult& r);
void write_memory_csv(std::ostream& os, const MemoryComparison& c);
void write_perturb_csv(std::ostream& os, const PerturbResult& r);

/// Runs the experiment `kind` (or cfg.kind when empty) and writes artifacts to out_dir.
/// Returns the process exit status.
int run_cli(const ExperimentConfig& cfg, const std::string& kind, const std::filesystem::path& out_dir, int threads,
            std::ostream& log);

/// Threads from the flag, else VISCOWAVE_THREADS, else hardware concurrency.
int resolve_threads(std::optional<int> flag);

}  // namespace viscowave
