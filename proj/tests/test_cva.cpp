#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ctrl_duality/cva.hpp"
#include "ctrl_duality/errors.hpp"
#include "oracles.hpp"

using namespace ctrl_duality;

namespace {

HjForcing constant_forcing(std::size_t n, double value, double horizon = 1.0) {
  return {std::vector<double>(n, value), std::vector<double>(n, 0.0), make_time_grid(horizon, n)};
}

// RK4 over each forcing interval separately, about 1e-4 per step.
double rk4_solution(const HjForcing& f, double terminal, double c) {
  double u = terminal;
  const auto& grid = f.grid;
  for (std::size_t i = grid.intervals(); i-- > 0;) {
    const double value = f.alpha[i] + f.beta[i];
    const long steps = std::max(1L, std::lround(grid.step(i) / 1e-4));
    u = oracle::rk4_backward(u, grid.time(i + 1), grid.time(i), c, [value](double) { return value; }, steps);
  }
  return u;
}

HjForcing random_forcing(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> count(1, 200);
  std::uniform_real_distribution<double> value(-5.0, 5.0);
  const std::size_t n = count(rng);
  HjForcing f{std::vector<double>(n), std::vector<double>(n, 0.0), make_time_grid(1.0, n)};
  for (auto& a : f.alpha) a = value(rng);
  return f;
}

}  // namespace

TEST_CASE("left-endpoint forcing reproduces the direct formula") {
  CvaSpec spec;
  spec.intensity = 0.1;
  spec.max_substep = 1.0;
  const auto grid = make_time_grid(1.0, 2);
  const std::vector<double> dw{0.3, -0.2};
  const auto f = zakai_forcing(spec, dw, grid);
  REQUIRE(f.grid.intervals() == 2);
  CHECK(f.alpha[0] == doctest::Approx(-0.542902).epsilon(1e-6));
  CHECK(f.alpha[0] == doctest::Approx(-0.6 * std::exp(-0.1)).epsilon(1e-14));
  CHECK(f.alpha[1] == doctest::Approx(0.4 * std::exp(-0.05)).epsilon(1e-14));
  CHECK(f.beta[0] == 0.0);
  CHECK(f.beta[1] == 0.0);
}

TEST_CASE("sub-sampled forcing follows phi along the step") {
  CvaSpec spec;
  spec.intensity = 0.7;
  spec.max_substep = 0.125;
  const auto grid = make_time_grid(1.0, 2);
  const std::vector<double> dw{0.3, -0.2};
  const auto f = zakai_forcing(spec, dw, grid);
  REQUIRE(f.grid.intervals() == 8);
  for (std::size_t q = 0; q < 8; ++q) {
    const double s = 0.125 * static_cast<double>(q);
    const double slope = (q < 4 ? 0.3 : -0.2) / 0.5;
    CHECK(f.grid.time(q) == doctest::Approx(s).epsilon(1e-15));
    CHECK(f.alpha[q] == doctest::Approx(-std::exp(-0.7 * (1.0 - s)) * slope).epsilon(1e-14));
    CHECK(f.beta[q] == 0.0);
  }
}

TEST_CASE("zero phi gives zero forcing") {
  CvaSpec spec;
  spec.phi_preset = PhiPreset::zero;
  const auto grid = make_time_grid(1.0, 5);
  const std::vector<double> dw{0.3, -0.2, 1.1, 0.0, -2.0};
  const auto f = zakai_forcing(spec, dw, grid);
  for (double a : f.alpha) CHECK(a == 0.0);
  for (double b : f.beta) CHECK(b == 0.0);
}

TEST_CASE("state-dependent phi contributes the beta term") {
  CvaSpec spec;
  spec.phi_preset = PhiPreset::custom;
  spec.sigma = 2.0;
  spec.max_substep = 1.0;
  spec.custom_phi = [](double, double x) { return x * x; };
  spec.custom_phi_dx = [](double, double x) { return 2.0 * x; };
  const auto grid = make_time_grid(1.0, 2);
  const std::vector<double> dw{0.5, 0.1};
  const auto f = zakai_forcing(spec, dw, grid);
  const double x1 = 2.0 * 0.5;
  CHECK(f.alpha[0] == 0.0);
  CHECK(f.beta[0] == 0.0);
  CHECK(f.alpha[1] == doctest::Approx(-x1 * x1 * 2.0 * 0.1 / 0.5).epsilon(1e-14));
  CHECK(f.beta[1] == doctest::Approx(0.5 * 2.0 * x1 * 4.0).epsilon(1e-14));
}

TEST_CASE("zero forcing keeps positive values and discounts negative ones") {
  const auto f = constant_forcing(4, 0.0);
  CHECK(solve_hj(f, 5.0, 0.1) == 5.0);
  CHECK(solve_hj(f, -5.0, 0.1) == doctest::Approx(-4.52419).epsilon(1e-6));
  CHECK(solve_hj(f, -5.0, 0.1) == doctest::Approx(-5.0 * std::exp(-0.1)).epsilon(1e-14));
  CHECK(solve_hj(f, -5.0, 0.1) == doctest::Approx(rk4_solution(f, -5.0, 0.1)).epsilon(1e-10));
}

TEST_CASE("hj solution matches RK4 on random piecewise-constant forcings") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> terminal(-5.0, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const HjForcing f = random_forcing(rng);
    const double g = terminal(rng);
    const double c = trial % 2 == 0 ? 0.1 : 0.7;
    const double err = std::abs(solve_hj(f, g, c) - rk4_solution(f, g, c));
    worst = std::max(worst, err);
    CHECK(err <= 1e-6);
  }
  MESSAGE("largest RK4 difference " << worst);
}

TEST_CASE("zero crossings inside a step") {
  // u(1) = -1, forcing +3 on [0, 1]: the negative branch reaches zero at
  // s = log(1 + c / 3) / c and the rest is linear.
  const double c = 0.7;
  const auto f = constant_forcing(1, 3.0);
  const double s = std::log1p(c / 3.0) / c;
  CHECK(solve_hj(f, -1.0, c) == doctest::Approx(3.0 * (1.0 - s)).epsilon(1e-14));
  // u(1) = 1, forcing -3: linear down to zero after 1/3, then damped.
  const auto g = constant_forcing(1, -3.0);
  const double rest = 2.0 / 3.0;
  const double expected = -3.0 * (1.0 - std::exp(-c * rest)) / c;
  CHECK(solve_hj(g, 1.0, c) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(hj_step(0.0, 0.0, c, 1.0) == 0.0);
}

TEST_CASE("larger forcing never lowers the solution") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> bump(0.0, 1.0), terminal(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    HjForcing lo = random_forcing(rng);
    HjForcing hi = lo;
    for (auto& a : hi.alpha) a += bump(rng);
    const double g = terminal(rng);
    for (double c : {0.1, 0.7}) CHECK(solve_hj(hi, g, c) >= solve_hj(lo, g, c));
  }
}

TEST_CASE("solution is continuous in the terminal value") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const HjForcing f = random_forcing(rng);
    for (double c : {0.1, 1.0}) {
      for (double g : {-1e-9, 0.0, 1e-9, 2.5, -2.5}) {
        const double u = solve_hj(f, g, c);
        CHECK(std::abs(solve_hj(f, g + 1e-9, c) - u) <= 1e-8);
        CHECK(std::abs(solve_hj(f, g - 1e-9, c) - u) <= 1e-8);
      }
    }
  }
}

TEST_CASE("closed form with zero phi") {
  CHECK(cva_exact_phizero(0.05, 1.0) == doctest::Approx(1.9458).epsilon(1e-4));
  CHECK(cva_exact_phizero(0.7, 1.0) == doctest::Approx(20.083).epsilon(1e-4));
  CHECK(cva_exact_phizero(0.1, 1.0) == doctest::Approx(3.7966).epsilon(1e-4));
  CHECK(cva_exact_phizero(0.0, 1.0) == 0.0);
  const double direct = 100.0 * (1.0 - std::exp(-0.1)) / std::sqrt(2.0 * M_PI);
  CHECK(cva_exact_phizero(0.1, 1.0) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("monte-carlo estimate with zero phi matches the closed form") {
  CvaSpec spec;
  spec.phi_preset = PhiPreset::zero;
  for (double c : {0.01, 0.05, 0.1, 0.7}) {
    spec.intensity = c;
    const auto e = cva_dual(spec, make_time_grid(1.0, 50), 1 << 13, 101);
    CHECK(std::abs(e.mean - cva_exact_phizero(c, 1.0)) <= 3.0 * e.std_error);
  }
}

TEST_CASE("no default risk gives zero") {
  CvaSpec spec;
  spec.intensity = 0.0;
  for (PhiPreset preset : {PhiPreset::zero, PhiPreset::discounted_delta}) {
    spec.phi_preset = preset;
    const auto e = cva_dual(spec, make_time_grid(1.0, 20), 1 << 13, 7);
    CHECK(std::abs(e.mean) <= 3.0 * e.std_error);
  }
}

TEST_CASE("zero martingale bound dominates the discounted-delta bound") {
  for (double c : {0.05, 0.7}) {
    CvaSpec spec;
    spec.intensity = c;
    const auto grid = make_time_grid(1.0, 50);
    const auto delta = cva_dual(spec, grid, 1 << 13, 55);
    spec.phi_preset = PhiPreset::zero;
    const auto zero = cva_dual(spec, grid, 1 << 13, 55);
    CHECK(zero.mean >= delta.mean - 2.0 * std::hypot(zero.std_error, delta.std_error));
  }
}

TEST_CASE("cva estimate is identical in serial and parallel") {
  CvaSpec spec;
  spec.intensity = 0.7;
  const auto grid = make_time_grid(1.0, 8);
  const auto a = cva_dual(spec, grid, 2048, 3, Execution::serial);
  const auto b = cva_dual(spec, grid, 2048, 3, Execution::parallel);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("cva spec validation") {
  CvaSpec spec;
  spec.intensity = -0.1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = CvaSpec{};
  spec.horizon = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = CvaSpec{};
  spec.max_substep = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
