#pragma once

#include "viscowave/dynamics.hpp"
#include "viscowave/grid.hpp"
#include "viscowave/kernel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace viscowave {

struct SobolevOptions {
  int random_seeds = 8;
  std::uint64_t seed = 0;
  int max_iterations = 5000;
  /// Converged once the ratio moves less than this (relative) over `window` iterations.
  double tolerance = 1e-10;
  int window = 50;
};

struct SobolevResult {
  double gamma = 0.0;
  /// Maximizer, normalized to |grad u|_2 = 1.
  Field maximizer;
  bool converged = false;
  int iterations = 0;
};

/// Best constant in |u|_{p+1} <= gamma |grad u|_2 over discrete Dirichlet fields.
///
/// H^1_0-gradient ascent: u <- (-lap)^{-1}(|u|^{p-1} u), renormalized. The
/// objective |u|_{p+1}^{p+1} is convex, so each iterate does at least as well
/// as the last. Starts from the lowest Laplacian eigenmode and a handful of
/// random fields and keeps the best.
SobolevResult sobolev_gamma(const Grid& grid, double p, const SobolevOptions& options = {});

/// F(y) = y - (2 gamma^2 y)^{(p+1)/2} / (p+1).
double F_eval(double y, double gamma, double p);
/// Maximizer of F on [0, inf).
double y0(double gamma, double p);
/// Mountain-pass level max F = F(y0).
double d_level(double gamma, double p);
double ystar(double gamma, double p, double k0);
/// Energy ceiling F(ystar) of the positive-energy blow-up regime.
double M_level(double gamma, double p, double k0);
/// Root of F(y) = E0 on the decreasing branch y > ystar; requires 0 <= E0 < M.
double solve_y1(double E0, double gamma, double p, double k0);
/// Lower bound (2 gamma^2 y1)^{(p+1)/2} on |u|_{p+1}^{p+1}.
double C0_bound(double y1, double gamma, double p);
double c_constant(double C0, double y1, double k0);

struct Hypotheses {
  bool within_assumption = false;
  bool p_gt_m = false;
  bool p_gt_sqrtk0 = false;
  bool E0_negative = false;
  bool E0_below_M = false;  // 0 <= E0 < M
  bool scriptE0_above_y0 = false;
  bool corollary_condition = false;  // |u0(0)|_{p+1}^{p+1} > |grad u0(0)|_2^2
  bool m_ge_p = false;

  bool negative_energy_blowup() const { return within_assumption && E0_negative && p_gt_m && p_gt_sqrtk0; }
  bool positive_energy_blowup() const {
    return within_assumption && p_gt_m && p_gt_sqrtk0 && E0_below_M && scriptE0_above_y0;
  }
  bool corollary_blowup() const { return within_assumption && p_gt_m && p_gt_sqrtk0 && E0_below_M && corollary_condition; }
  bool global_existence() const { return within_assumption && m_ge_p; }
};

/// Initial quantities feeding the hypothesis checks.
struct InitialEnergetics {
  double E0 = 0.0;
  double scriptE0 = 0.0;
  double lp_power0 = 0.0;     // |u0(0)|_{p+1}^{p+1}
  double grad_squared0 = 0.0;  // |grad u0(0)|_2^2
};

struct CriteriaReport {
  double gamma = 0.0;
  double p = 0.0;
  double m = 0.0;
  double k0 = 1.0;
  double y0 = 0.0;
  double d = 0.0;
  double ystar = 0.0;
  double M = 0.0;
  InitialEnergetics initial;
  std::optional<double> y1;
  std::optional<double> C0;
  std::optional<double> c;
  Hypotheses hyp;
  /// Corollary condition held but scriptE0 > y0 did not.
  bool consistency_error = false;
  std::vector<std::string> notes;
};

CriteriaReport check_hypotheses(const ModelParams& params, const KernelSpec& kernel, double gamma,
                                const InitialEnergetics& init);

struct EpsilonConstraint {
  std::string expression;
  /// NaN when the bound depends on constants that are not being tracked.
  double bound;
};

/// Which Lyapunov construction the parameters feed.
enum class BlowupPath { negative_energy, positive_energy };

struct ProofParameters {
  BlowupPath path = BlowupPath::negative_energy;
  double delta = 0.0;
  double alpha = 0.0;
  double alpha_limit_damping = 0.0;  // 1/(m+1) - 1/(p+1)
  double alpha_limit_source = 0.0;   // (p-1)/(2(p+1))
  double sigma = 0.0;
  /// Value that lambda G(0)^{1/(p+1) - 1/(m+1)} is set to.
  double lambda_target = 0.0;
  double lambda = 0.0;
  std::vector<EpsilonConstraint> epsilon_constraints;
  double epsilon = 0.0;  // largest admissible among the numeric bounds
  bool constants_tracked = false;
  double C_lambda = std::numeric_limits<double>::quiet_NaN();
  double growth_constant = std::numeric_limits<double>::quiet_NaN();  // Y' >= eps^{1+sigma} K Y^{1/(1-alpha)}
  std::optional<double> Tmax_bound;
  std::string Tmax_note;
};

struct ProofInputs {
  ModelParams params;
  double k0 = 1.0;
  double G0 = 0.0;
  double Nprime0 = 0.0;
  BlowupPath path = BlowupPath::negative_energy;
  /// Required for the positive-energy path.
  std::optional<double> c;
  /// |Omega|; enables explicit Young/Holder constants and the T_max bound.
  std::optional<double> domain_measure;
};

ProofParameters proof_parameters(const ProofInputs& in);

}  // namespace viscowave
