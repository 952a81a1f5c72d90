#include "viscowave/kernel.hpp"

#include <doctest.h>

#include <random>

using namespace viscowave;

namespace {

// Composite Simpson on [a, b] with n (even) panels.
template <class Fn>
double simpson(Fn f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

KernelSpec random_kernel(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4);
  std::uniform_real_distribution<double> amp(0.05, 3.0), tau(0.1, 5.0);
  KernelSpec k;
  for (int i = count(rng); i > 0; --i) k.modes.push_back({amp(rng), tau(rng)});
  return k;
}

}  // namespace

TEST_CASE("validation of Prony kernels") {
  auto v = validate(KernelSpec{{{1.0, 1.0}}});
  CHECK(v.valid);
  CHECK(v.k0 == doctest::Approx(2.0));
  CHECK(v.mu_mass == doctest::Approx(1.0));

  auto empty = validate(KernelSpec{});
  CHECK(empty.valid);
  CHECK(empty.k0 == 1.0);

  auto bad = validate(KernelSpec{{{-1.0, 1.0}}});
  CHECK_FALSE(bad.valid);
  CHECK(bad.first_violation.find("amplitude must be positive") != std::string::npos);
  CHECK_THROWS_AS(require_valid(KernelSpec{{{-1.0, 1.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(require_valid(KernelSpec{{{1.0, 0.0}}}), std::invalid_argument);
}

TEST_CASE("closed-form evaluations") {
  KernelSpec k{{{1.0, 1.0}}};
  CHECK(eval_k(k, 0.0) == doctest::Approx(2.0));
  CHECK(eval_mu(k, 0.0) == doctest::Approx(1.0));
  CHECK(eval_mu_prime(k, 0.0) == doctest::Approx(-1.0));
  CHECK(tail_mass(k, 0.0) == doctest::Approx(1.0));

  KernelSpec k2{{{1.0, 1.0}, {0.5, 2.0}}};
  CHECK(eval_k(k2, 0.0) == doctest::Approx(2.5));
  CHECK(eval_mu(k2, 0.0) == doctest::Approx(1.25));

  CHECK(eval_k(k, 60.0) == doctest::Approx(1.0).epsilon(1e-20));
  CHECK(eval_mu(k, 60.0) < 1e-25);
  CHECK(tail_mass(k, 60.0) < 1e-25);
  CHECK_THROWS_AS(eval_k(k, -1.0), std::domain_error);
}

TEST_CASE("mu matches the numerical derivative of k, and tail mass its integral") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const KernelSpec k = random_kernel(rng);
    REQUIRE(validate(k).valid);
    const double s = 3.0 * tau_max(k) * unit(rng);
    const double h = 1e-5 * tau_min(k);
    const double lo = std::max(0.0, s - h);
    const double dk = (eval_k(k, s + h) - eval_k(k, lo)) / (s + h - lo);
    CHECK(eval_mu(k, s) == doctest::Approx(-dk).epsilon(1e-6));

    const double upper = s + 40.0 * tau_max(k);
    const double quad = simpson([&](double x) { return eval_mu(k, x); }, s, upper, 20000);
    CHECK(tail_mass(k, s) == doctest::Approx(quad).epsilon(1e-8));

    double prev = eval_mu(k, 0.0);
    for (double t = 0.1; t < 10.0; t += 0.1) {
      const double now = eval_mu(k, t);
      CHECK(now <= prev);
      CHECK(eval_mu_prime(k, t) <= 0.0);
      prev = now;
    }
  }
}
