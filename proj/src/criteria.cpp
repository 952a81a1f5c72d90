#include "viscowave/criteria.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>
#include <stdexcept>

namespace viscowave {

namespace {

Eigen::SparseMatrix<double> negative_laplacian_matrix(const Grid& grid) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(grid.size()) * (2 * grid.dim() + 1));
  for (int d = 0; d < grid.dim(); ++d) {
    const double w = 1.0 / (grid.spacing(d) * grid.spacing(d));
    detail::for_each_line(grid, d, [&](std::ptrdiff_t off, std::ptrdiff_t s, std::ptrdiff_t n) {
      for (std::ptrdiff_t j = 0; j < n; ++j) {
        const auto i = off + j * s;
        trip.emplace_back(i, i, 2.0 * w);
        if (j > 0) trip.emplace_back(i, i - s, -w);
        if (j + 1 < n) trip.emplace_back(i, i + s, -w);
      }
    });
  }
  Eigen::SparseMatrix<double> A(grid.size(), grid.size());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Field lowest_mode(const Grid& grid) {
  return grid.sample([&](const std::array<double, 3>& x) {
    double v = 1.0;
    for (int d = 0; d < grid.dim(); ++d) v *= std::sin(M_PI * x[d] / grid.extent(d));
    return v;
  });
}

Field nonlinearity(const Field& u, double p) {
  if (p == 1.0) return u;
  if (p == 3.0) return u.array().cube().matrix();
  return (u.array().abs().pow(p - 1.0) * u.array()).matrix();
}

}  // namespace

SobolevResult sobolev_gamma(const Grid& grid, double p, const SobolevOptions& opt) {
  if (!(p >= 1.0 && p <= 5.0)) throw std::invalid_argument("Sobolev constant needs 1 <= p <= 5");
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(negative_laplacian_matrix(grid));
  if (solver.info() != Eigen::Success) throw std::runtime_error("Laplacian factorization failed");

  std::vector<Field> seeds{lowest_mode(grid)};
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int k = 0; k < opt.random_seeds; ++k) {
    Field f(grid.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = unif(rng);
    seeds.push_back(std::move(f));
  }

  const double q = p + 1.0;
  auto ratio = [&](const Field& u) { return norm_lp(grid, u, q) / h1_seminorm(grid, u); };

  SobolevResult best;
  best.gamma = -1.0;
  for (auto& u : seeds) {
    u /= h1_seminorm(grid, u);
    std::deque<double> hist{ratio(u)};
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
      Field next = solver.solve(nonlinearity(u, p));
      const double h = h1_seminorm(grid, next);
      if (!(h > 0.0) || !std::isfinite(h)) break;
      u = next / h;
      hist.push_back(ratio(u));
      if (static_cast<int>(hist.size()) > opt.window) {
        hist.pop_front();
        if (std::abs(hist.back() - hist.front()) < opt.tolerance * hist.back()) {
          converged = true;
          break;
        }
      }
    }
    if (hist.back() > best.gamma) {
      best.gamma = hist.back();
      best.maximizer = u;
      best.converged = converged;
      best.iterations = it;
    }
  }
  return best;
}

double F_eval(double y, double gamma, double p) {
  if (!(y >= 0.0)) throw std::domain_error("F is defined for y >= 0");
  return y - std::pow(2.0 * gamma * gamma * y, 0.5 * (p + 1.0)) / (p + 1.0);
}

namespace {
void require_gamma_p(double gamma, double p) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
}
double well_exponent(double p) { return 2.0 * (p + 1.0) / (p - 1.0); }
}  // namespace

double y0(double gamma, double p) {
  require_gamma_p(gamma, p);
  return 0.5 * std::pow(gamma, -well_exponent(p));
}

double d_level(double gamma, double p) {
  require_gamma_p(gamma, p);
  return (0.5 - 1.0 / (p + 1.0)) * std::pow(gamma, -well_exponent(p));
}

double ystar(double gamma, double p, double k0) {
  require_gamma_p(gamma, p);
  if (!(k0 >= 1.0)) throw std::invalid_argument("k(0) must be at least 1");
  return std::pow(std::sqrt(k0) + 1.0, 2.0 / (p - 1.0)) * std::pow(2.0 * gamma * gamma, -(p + 1.0) / (p - 1.0));
}

double M_level(double gamma, double p, double k0) {
  return ystar(gamma, p, k0) * (p - std::sqrt(k0)) / (p + 1.0);
}

double solve_y1(double E0, double gamma, double p, double k0) {
  const double M = M_level(gamma, p, k0);
  if (E0 < 0.0) throw std::domain_error("E(0) < 0: use the negative-energy blow-up path");
  if (!(E0 < M)) throw std::domain_error("E(0) >= M: positive-energy hypotheses fail, no y1");
  double lo = ystar(gamma, p, k0);
  double hi = 2.0 * lo;
  while (F_eval(hi, gamma, p) >= E0) hi *= 2.0;
  for (int it = 0; it < 2000 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (F_eval(mid, gamma, p) > E0)
      lo = mid;
    else
      hi = mid;
  }
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double dF = 1.0 - gamma * gamma * std::pow(2.0 * gamma * gamma * y, 0.5 * (p - 1.0));
    if (dF == 0.0) break;
    const double next = y - (F_eval(y, gamma, p) - E0) / dF;
    if (!(next >= lo && next <= hi)) break;
    y = next;
  }
  return y;
}

double C0_bound(double y1, double gamma, double p) { return std::pow(2.0 * gamma * gamma * y1, 0.5 * (p + 1.0)); }

double c_constant(double C0, double y1, double k0) { return (C0 - (std::sqrt(k0) + 1.0) * y1) / (2.0 * C0); }

CriteriaReport check_hypotheses(const ModelParams& params, const KernelSpec& kernel, double gamma,
                                const InitialEnergetics& init) {
  CriteriaReport r;
  r.gamma = gamma;
  r.p = params.p;
  r.m = params.m;
  r.k0 = k0(kernel);
  r.initial = init;
  r.y0 = y0(gamma, params.p);
  r.d = d_level(gamma, params.p);
  r.ystar = ystar(gamma, params.p, r.k0);
  r.M = M_level(gamma, params.p, r.k0);

  auto& h = r.hyp;
  h.within_assumption = params.within_assumption();
  h.p_gt_m = params.p > params.m;
  h.p_gt_sqrtk0 = params.p > std::sqrt(r.k0);
  h.E0_negative = init.E0 < 0.0;
  h.E0_below_M = init.E0 >= 0.0 && init.E0 < r.M;
  h.scriptE0_above_y0 = init.scriptE0 > r.y0;
  h.corollary_condition = init.lp_power0 > init.grad_squared0;
  h.m_ge_p = params.m >= params.p;

  if (h.E0_below_M && h.p_gt_sqrtk0) {
    r.y1 = solve_y1(init.E0, gamma, params.p, r.k0);
    r.C0 = C0_bound(*r.y1, gamma, params.p);
    r.c = c_constant(*r.C0, *r.y1, r.k0);
  }
  if (h.corollary_condition && !h.scriptE0_above_y0) {
    r.consistency_error = true;
    r.notes.push_back("corollary condition holds but scriptE(0) <= y0");
  }
  if (!h.within_assumption) r.notes.push_back("exponents outside the standing assumption");
  if (h.positive_energy_blowup())
    r.notes.push_back("monitor: scriptE(t) >= y1 and |u(t)|_{p+1}^{p+1} >= C0 until blow-up");
  return r;
}

ProofParameters proof_parameters(const ProofInputs& in) {
  const double p = in.params.p, m = in.params.m, k0 = in.k0;
  const double sk = std::sqrt(k0);
  if (!(in.G0 > 0.0)) throw std::invalid_argument("proof parameters need G(0) > 0");
  if (!(p > m) || !(p > sk)) throw std::invalid_argument("proof parameters need p > max(m, sqrt(k(0)))");
  if (in.path == BlowupPath::positive_energy && !(in.c && *in.c > 0.0))
    throw std::invalid_argument("positive-energy path needs c > 0");

  ProofParameters out;
  out.path = in.path;
  out.delta = 0.5 * (sk + 1.0);
  out.alpha_limit_damping = 1.0 / (m + 1.0) - 1.0 / (p + 1.0);
  out.alpha_limit_source = (p - 1.0) / (2.0 * (p + 1.0));
  out.alpha = 0.5 * std::min(out.alpha_limit_damping, out.alpha_limit_source);
  const double alpha = out.alpha;
  out.sigma = 1.0 - 2.0 / ((1.0 - 2.0 * alpha) * (p + 1.0));
  out.lambda_target = in.path == BlowupPath::negative_energy ? (p - sk) / (2.0 * (p + 1.0)) : 0.5 * *in.c;
  const double e_damp = 1.0 / (p + 1.0) - 1.0 / (m + 1.0);  // negative
  out.lambda = out.lambda_target / std::pow(in.G0, e_damp);

  out.epsilon_constraints.push_back({"epsilon <= 1", 1.0});
  out.epsilon_constraints.push_back({"epsilon <= G(0)", in.G0});
  if (in.Nprime0 < 0.0)
    out.epsilon_constraints.push_back(
        {"epsilon <= -G(0)^(1-alpha) / (2 N'(0))", -std::pow(in.G0, 1.0 - alpha) / (2.0 * in.Nprime0)});

  const std::string damping_expr = "epsilon * C_lambda * G(0)^(1/(p+1) - 1/(m+1) + alpha) <= 1 - alpha";
  if (in.domain_measure) {
    const double omega = *in.domain_measure;
    // |int u |u_t|^{m-1} u_t| <= C_ut G^{e_damp} (|u|_{p+1}^{(p+1)/(m+1)} |u_t|_{m+1}^m) via Holder
    // on Omega and |u|_{p+1}^{p+1} >= (p+1) G.
    const double c_ut = std::pow(omega, 1.0 / (m + 1.0) - 1.0 / (p + 1.0)) * std::pow(p + 1.0, e_damp);
    // Young ab <= l a^{m+1} + (m/(m+1)) ((m+1) l)^{-1/m} b^{(m+1)/m} with l = lambda / c_ut.
    const double l = out.lambda / c_ut;
    out.C_lambda = c_ut * (m / (m + 1.0)) * std::pow((m + 1.0) * l, -1.0 / m);
    out.constants_tracked = true;
    out.epsilon_constraints.push_back(
        {damping_expr, (1.0 - alpha) / (out.C_lambda * std::pow(in.G0, e_damp + alpha))});
  } else {
    out.epsilon_constraints.push_back({damping_expr, std::numeric_limits<double>::quiet_NaN()});
  }

  out.epsilon = std::numeric_limits<double>::infinity();
  for (const auto& c : out.epsilon_constraints)
    if (std::isfinite(c.bound)) out.epsilon = std::min(out.epsilon, c.bound);

  if (!out.constants_tracked) {
    out.Tmax_note = "finite, constant-dependent";
    return out;
  }
  const double omega = *in.domain_measure;
  const double r = 1.0 / (1.0 - alpha);
  const double c_e = std::pow(omega, 0.5 - 1.0 / (p + 1.0));
  const double k_young = 0.5 * (2.0 - r) * std::pow(c_e, 2.0 / (1.0 - 2.0 * alpha)) * std::pow(p + 1.0, -out.sigma);
  const double c_upper = std::pow(2.0, r - 1.0) * std::max({1.0, 0.5 * r, k_young});
  double c_lower;
  if (in.path == BlowupPath::negative_energy) {
    c_lower = std::min({0.5 * (sk + 3.0), sk + 1.0, (p - sk) / (2.0 * (p + 1.0))});
  } else {
    const double c = *in.c;
    c_lower = 0.5 * std::min({sk + 3.0, 0.5 * c, 0.5 * c * (p + 1.0)});
  }
  out.growth_constant = c_lower / c_upper;
  const double eps = out.epsilon;
  const double Y0 = std::pow(in.G0, 1.0 - alpha) + eps * in.Nprime0;
  if (Y0 > 0.0) {
    out.Tmax_bound = (1.0 - alpha) / alpha * std::pow(eps, -(1.0 + out.sigma)) / out.growth_constant *
                     std::pow(Y0, -alpha / (1.0 - alpha));
    out.Tmax_note = "explicit Holder/Young constants on the box domain";
  } else {
    out.Tmax_note = "Y(0) <= 0 with the chosen epsilon";
  }
  return out;
}

}  // namespace viscowave
