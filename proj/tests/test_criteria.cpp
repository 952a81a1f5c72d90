#include "viscowave/criteria.hpp"
#include "viscowave/energy.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace viscowave;

namespace {

Field mode(const Grid& g, int k) {
  return g.sample([&](const std::array<double, 3>& x) { return std::sin(k * M_PI * x[0] / g.extent(0)); });
}

InitialEnergetics at_rest(const Grid& g, const Field& u, double p) {
  InitialEnergetics e;
  e.grad_squared0 = inner_grad(g, u, u);
  e.lp_power0 = lp_power(g, u, p + 1.0);
  e.scriptE0 = 0.5 * e.grad_squared0;
  e.E0 = e.scriptE0 - e.lp_power0 / (p + 1.0);
  return e;
}

}  // namespace

TEST_CASE("energy levels for gamma = 1, p = 3, k(0) = 4") {
  // F(y) = y - y^2 here, so y0 = 1/2, d = 1/4, ystar = 3/4 and M = F(3/4) = 3/16.
  CHECK(F_eval(0.3, 1.0, 3.0) == doctest::Approx(0.3 - 0.09).epsilon(1e-14));
  CHECK(y0(1.0, 3.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d_level(1.0, 3.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ystar(1.0, 3.0, 4.0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(M_level(1.0, 3.0, 4.0) == doctest::Approx(0.1875).epsilon(1e-12));
  CHECK(F_eval(0.75, 1.0, 3.0) == doctest::Approx(M_level(1.0, 3.0, 4.0)).epsilon(1e-12));

  // y - y^2 = 0.1 on the branch y > 3/4.
  const double y1 = solve_y1(0.1, 1.0, 3.0, 4.0);
  CHECK(y1 == doctest::Approx(0.5 * (1.0 + std::sqrt(0.6))).epsilon(1e-12));
  CHECK(C0_bound(y1, 1.0, 3.0) == doctest::Approx(4.0 * y1 * y1).epsilon(1e-12));
  const double C0 = 4.0 * y1 * y1;
  CHECK(c_constant(C0, y1, 4.0) == doctest::Approx((C0 - 3.0 * y1) / (2.0 * C0)).epsilon(1e-12));
  CHECK(c_constant(C0, y1, 4.0) > 0.0);

  CHECK_THROWS(solve_y1(-0.1, 1.0, 3.0, 4.0));
  CHECK_THROWS(solve_y1(0.2, 1.0, 3.0, 4.0));
  CHECK_THROWS(ystar(1.0, 3.0, 0.5));
  CHECK_THROWS(F_eval(-1.0, 1.0, 3.0));
}

TEST_CASE("level ordering on random parameters") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ug(0.2, 2.0), up(1.5, 5.0), u01(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double g = ug(rng), p = up(rng);
    const double k0 = 1.0 + u01(rng) * (p * p - 1.0) * 0.999;
    const double y_0 = y0(g, p), d = d_level(g, p), ys = ystar(g, p, k0), M = M_level(g, p, k0);
    CHECK(ys >= y_0 * (1.0 - 1e-12));
    CHECK(M <= d * (1.0 + 1e-12));
    CHECK(M > 0.0);
    CHECK(d == doctest::Approx(F_eval(y_0, g, p)).epsilon(1e-10));
    CHECK(F_eval(y_0 * 1.01, g, p) < d);
    CHECK(F_eval(y_0 * 0.99, g, p) < d);
    CHECK(M_level(g, p, std::min(k0 * 1.1, p * p)) < M);
    const double E0 = u01(rng) * M * 0.999;
    const double y1 = solve_y1(E0, g, p, k0);
    CHECK(y1 > ys);
    CHECK(F_eval(y1, g, p) == doctest::Approx(E0).scale(M).epsilon(1e-10));
  }
}

TEST_CASE("M approaches d as k(0) decreases to 1") {
  const double g = 0.4, p = 3.0;
  const double d = d_level(g, p);
  double prev = 1e300;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
    const double gap = d - M_level(g, p, 1.0 + eps);
    CHECK(gap > 0.0);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-6 * d);
  CHECK(M_level(g, p, 1.0) == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("Sobolev constant for p = 1 is the inverse root of the first eigenvalue") {
  for (int n : {31, 127}) {
    Grid g = Grid::interval(1.0, n);
    const double h = g.spacing(0);
    const double lambda1 = 4.0 / (h * h) * std::pow(std::sin(M_PI * h / 2.0), 2);
    auto r = sobolev_gamma(g, 1.0);
    CHECK(r.gamma == doctest::Approx(1.0 / std::sqrt(lambda1)).epsilon(1e-9));
  }
}

TEST_CASE("Sobolev constant: refinement, scaling and domain size") {
  const double p = 3.0;
  const double g127 = sobolev_gamma(Grid::interval(1.0, 127), p).gamma;
  const double g255 = sobolev_gamma(Grid::interval(1.0, 255), p).gamma;
  CHECK(std::abs(g127 - g255) < 0.01 * g255);

  // x -> L x maps discrete fields to discrete fields, |u|_q picks up L^{1/q} and
  // |grad u|_2 picks up L^{-1/2}.
  const double g2 = sobolev_gamma(Grid::interval(2.0, 127), p).gamma;
  CHECK(g2 == doctest::Approx(g127 * std::pow(2.0, 0.25 + 0.5)).epsilon(1e-8));
  CHECK(g2 >= g127);

  // Zero extension embeds the unit-interval fields into the longer interval.
  const double g_long = sobolev_gamma(Grid::interval(3.0, 383), p).gamma;
  CHECK(g_long >= g127 * (1.0 - 1e-9));

  // The maximizer beats every sampled field.
  Grid g = Grid::interval(1.0, 127);
  auto r = sobolev_gamma(g, p);
  CHECK(h1_seminorm(g, r.maximizer) == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 50; ++i) {
    Field u(g.size());
    for (auto& x : u) x = n01(rng);
    CHECK(norm_lp(g, u, p + 1.0) / h1_seminorm(g, u) <= r.gamma * (1.0 + 1e-12));
  }
  CHECK(norm_lp(g, mode(g, 1), p + 1.0) / h1_seminorm(g, mode(g, 1)) <= r.gamma * (1.0 + 1e-12));
}

TEST_CASE("hypothesis checks") {
  Grid g = Grid::interval(1.0, 127);
  const double gamma = sobolev_gamma(g, 3.0).gamma;
  ModelParams mp{3.0, 2.0, true, true, false};
  KernelSpec k{{{1.0, 1.0}}};

  auto neg = check_hypotheses(mp, k, gamma, at_rest(g, 6.0 * mode(g, 1), 3.0));
  CHECK(neg.k0 == 2.0);
  CHECK(neg.hyp.negative_energy_blowup());
  CHECK_FALSE(neg.hyp.positive_energy_blowup());
  CHECK_FALSE(neg.y1);

  auto small = check_hypotheses(mp, k, gamma, at_rest(g, 0.5 * mode(g, 1), 3.0));
  CHECK_FALSE(small.hyp.negative_energy_blowup());
  CHECK_FALSE(small.hyp.scriptE0_above_y0);
  CHECK_FALSE(small.hyp.corollary_condition);

  ModelParams eq{3.0, 3.0, true, true, false};
  auto same = check_hypotheses(eq, k, gamma, at_rest(g, 6.0 * mode(g, 1), 3.0));
  CHECK(same.hyp.global_existence());
  CHECK_FALSE(same.hyp.negative_energy_blowup());
  CHECK_FALSE(same.hyp.positive_energy_blowup());
  CHECK_FALSE(same.hyp.corollary_blowup());

  ModelParams wild{5.0, 2.0, true, true, true};
  auto out = check_hypotheses(wild, k, gamma, at_rest(g, 6.0 * mode(g, 1), 5.0));
  CHECK_FALSE(out.hyp.within_assumption);
  CHECK_FALSE(out.hyp.negative_energy_blowup());

  // Find an amplitude with 0 <= E0 < M and scriptE0 > y0.
  bool found = false;
  for (double A = 3.0; A < 6.0 && !found; A += 0.01) {
    auto r = check_hypotheses(mp, k, gamma, at_rest(g, A * mode(g, 1), 3.0));
    if (!r.hyp.positive_energy_blowup()) continue;
    found = true;
    REQUIRE(r.y1);
    CHECK(F_eval(*r.y1, gamma, 3.0) == doctest::Approx(r.initial.E0).scale(r.M).epsilon(1e-10));
    CHECK(*r.y1 > r.ystar);
    CHECK(*r.c > 0.0);
  }
  CHECK(found);
}

TEST_CASE("corollary condition implies the quadratic energy exceeds y0") {
  Grid g = Grid::interval(1.0, 127);
  const double p = 3.0;
  const double gamma = sobolev_gamma(g, p).gamma;
  ModelParams mp{p, 2.0, true, true, false};
  KernelSpec k{{{1.0, 1.0}}};
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> nm(1, 5);
  int tested = 0;
  for (int i = 0; i < 200; ++i) {
    Field u = g.zeros();
    const int modes = nm(rng);
    for (int j = 1; j <= modes; ++j) u += n01(rng) * mode(g, j);
    // Scale to just past |u|_4^4 = |grad u|_2^2.
    const double ratio = lp_power(g, u, p + 1.0) / inner_grad(g, u, u);
    u *= std::sqrt(1.0 / ratio) * (1.0 + 0.5 * std::abs(n01(rng)) + 1e-6);
    auto r = check_hypotheses(mp, k, gamma, at_rest(g, u, p));
    REQUIRE(r.hyp.corollary_condition);
    ++tested;
    CHECK(r.hyp.scriptE0_above_y0);
    CHECK_FALSE(r.consistency_error);
  }
  CHECK(tested == 200);
}

TEST_CASE("proof parameters") {
  ProofInputs in;
  in.params = ModelParams{3.0, 2.0, true, true, false};
  in.k0 = 4.0;
  in.G0 = 1.0;
  auto pp = proof_parameters(in);
  CHECK(pp.alpha_limit_damping == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(pp.alpha_limit_source == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(pp.alpha == doctest::Approx(1.0 / 24.0).epsilon(1e-14));
  CHECK(pp.sigma == doctest::Approx(5.0 / 11.0).epsilon(1e-14));
  CHECK(pp.delta == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(pp.lambda_target == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
  CHECK(pp.lambda == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
  // N'(0) = 0 adds no constraint; untracked constants give an unresolved bound.
  CHECK(pp.epsilon_constraints.size() == 3);
  CHECK(std::isnan(pp.epsilon_constraints.back().bound));
  CHECK(pp.epsilon == 1.0);
  CHECK_FALSE(pp.Tmax_bound);
  CHECK_FALSE(pp.Tmax_note.empty());

  in.Nprime0 = -2.0;
  in.G0 = 16.0;
  auto pn = proof_parameters(in);
  CHECK(pn.epsilon_constraints.size() == 4);
  CHECK(pn.epsilon_constraints[2].bound == doctest::Approx(std::pow(16.0, 23.0 / 24.0) / 4.0).epsilon(1e-12));
  CHECK(pn.epsilon == 1.0);
  CHECK(pn.lambda == doctest::Approx(0.125 * std::pow(16.0, 1.0 / 12.0)).epsilon(1e-12));

  in.Nprime0 = 0.0;
  in.G0 = 32.67;
  in.k0 = 2.0;
  in.domain_measure = 1.0;
  auto pt = proof_parameters(in);
  CHECK(pt.constants_tracked);
  CHECK(std::isfinite(pt.epsilon_constraints.back().bound));
  REQUIRE(pt.Tmax_bound);
  CHECK(*pt.Tmax_bound > 0.0);
  CHECK(std::isfinite(*pt.Tmax_bound));

  in.path = BlowupPath::positive_energy;
  CHECK_THROWS(proof_parameters(in));
  in.c = 0.2;
  auto pc = proof_parameters(in);
  CHECK(pc.lambda_target == doctest::Approx(0.1).epsilon(1e-14));

  ProofInputs bad;
  bad.params = ModelParams{3.0, 3.0, true, true, false};
  bad.G0 = 1.0;
  CHECK_THROWS(proof_parameters(bad));
  bad.params.m = 2.0;
  bad.G0 = 0.0;
  CHECK_THROWS(proof_parameters(bad));
}
