#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/payoffs.hpp"
#include "ctrl_duality/pde.hpp"
#include "oracles.hpp"

using namespace ctrl_duality;

namespace {

UvmSpec uvm(payoffs::Terminal payoff, double lo = 0.1, double hi = 0.2) {
  UvmSpec u;
  u.sigma_lo = {lo};
  u.sigma_hi = {hi};
  u.sigma_hat = {0.5 * (lo + hi)};
  u.payoff = std::move(payoff);
  return u;
}

double cva_value(double c, std::size_t nodes = 400, std::size_t steps = 400) {
  CvaSpec spec;
  spec.intensity = c;
  Grid1D g = default_cva_grid(spec);
  g.nodes = nodes;
  g.steps = steps;
  return solve_cva_pde(spec, g).value;
}

double bsb_value(const UvmSpec& u, std::size_t nodes = 400, std::size_t steps = 400) {
  Grid1D g = default_bsb_grid(u);
  g.nodes = nodes;
  g.steps = steps;
  return solve_bsb_1d(u, g).value;
}

// Explicit upwind-free scheme in log space with the volatility chosen per
// node by the sign of the discrete generator; boundaries frozen at the payoff.
// The terminal value is the payoff averaged over each cell by a 200-point
// midpoint rule.
double explicit_bsb(const UvmSpec& u, std::size_t nodes, double width) {
  const double lo = std::log(u.x0[0]) - width, hi = std::log(u.x0[0]) + width;
  const double h = (hi - lo) / static_cast<double>(nodes - 1);
  const double s2lo = u.sigma_lo[0] * u.sigma_lo[0], s2hi = u.sigma_hi[0] * u.sigma_hi[0];
  const auto steps = static_cast<std::size_t>(std::ceil(u.horizon * s2hi / (0.45 * h * h)));
  const double dt = u.horizon / static_cast<double>(steps);
  std::vector<double> v(nodes), next(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const double y = lo + h * static_cast<double>(j);
    double sum = 0.0;
    for (int q = 0; q < 200; ++q) {
      const double z = y - 0.5 * h + h * (q + 0.5) / 200.0;
      sum += u.payoff(std::vector<double>{std::exp(z)});
    }
    v[j] = sum / 200.0;
  }
  for (std::size_t n = 0; n < steps; ++n) {
    next = v;
    for (std::size_t j = 1; j + 1 < nodes; ++j) {
      const double vyy = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
      const double vy = (v[j + 1] - v[j - 1]) / (2.0 * h);
      const double gen = vyy - vy;
      next[j] = v[j] + dt * 0.5 * (gen > 0.0 ? s2hi : s2lo) * gen;
    }
    v.swap(next);
  }
  const double pos = (std::log(u.x0[0]) - lo) / h;
  const auto j = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * v[j] + w * v[j + 1];
}

}  // namespace

TEST_CASE("tridiagonal solver matches a dense solve") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> off(-1.0, 1.0);
  const std::size_t n = 12;
  std::vector<double> lower(n), diag(n), upper(n), rhs(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    lower[i] = i > 0 ? off(rng) : 0.0;
    upper[i] = i + 1 < n ? off(rng) : 0.0;
    diag[i] = 3.0 + off(rng);
    rhs[i] = b(static_cast<Eigen::Index>(i)) = off(rng);
    const auto r = static_cast<Eigen::Index>(i);
    a(r, r) = diag[i];
    if (i > 0) a(r, r - 1) = lower[i];
    if (i + 1 < n) a(r, r + 1) = upper[i];
  }
  const Eigen::VectorXd x = a.fullPivLu().solve(b);
  solve_tridiagonal(lower, diag, upper, rhs);
  for (std::size_t i = 0; i < n; ++i) CHECK(rhs[i] == doctest::Approx(x(static_cast<Eigen::Index>(i))).epsilon(1e-12));
}

TEST_CASE("cva pde without default risk reproduces the linear payoff") {
  CHECK(std::abs(cva_value(0.0)) <= 1e-8);
}

TEST_CASE("cva pde values") {
  CHECK(std::abs(cva_value(0.01) - 0.26) <= 0.03);
  CHECK(std::abs(cva_value(0.05) - 1.29) <= 0.03);
  CHECK(std::abs(cva_value(0.1) - 2.52) <= 0.03);
  CHECK(std::abs(cva_value(0.7) - 13.60) <= 0.10);
}

TEST_CASE("cva pde value increases with the intensity") {
  double prev = cva_value(0.0);
  for (double c : {0.01, 0.05, 0.1, 0.3, 0.7, 1.0}) {
    const double v = cva_value(c);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("cva pde grid refinement") {
  CHECK(std::abs(cva_value(0.1, 800, 800) - cva_value(0.1)) <= 0.03);
  CHECK(std::abs(cva_value(0.7, 800, 800) - cva_value(0.7)) <= 0.10);
}

TEST_CASE("cva pde reports blow-up") {
  CvaSpec spec;
  spec.intensity = 1e8;
  Grid1D g = default_cva_grid(spec);
  g.steps = 1;
  CHECK_THROWS_WITH_AS(solve_cva_pde(spec, g), doctest::Contains("increase the number of time steps"),
                       NumericalError);
}

TEST_CASE("pde grids are validated") {
  CvaSpec spec;
  Grid1D g = default_cva_grid(spec);
  g.nodes = 2;
  CHECK_THROWS_AS(solve_cva_pde(spec, g), ConfigError);
  g = default_cva_grid(spec);
  g.hi = 1.0;
  CHECK_THROWS_WITH_AS(solve_cva_pde(spec, g), doctest::Contains("5 standard deviations"), ConfigError);
  UvmSpec two;
  two.assets = 2;
  two.x0 = {100.0, 100.0};
  two.sigma_lo = {0.1, 0.1};
  two.sigma_hi = {0.2, 0.2};
  two.sigma_hat = {0.15, 0.15};
  two.payoff = payoffs::outperformer();
  CHECK_THROWS_AS(solve_bsb_1d(two, Grid1D{}), ConfigError);
}

TEST_CASE("flat box bsb equals the constant-volatility price") {
  const UvmSpec u = uvm(payoffs::call_spread(90.0, 110.0), 0.15, 0.15);
  CHECK(std::abs(bsb_value(u) - oracle::bs_call_spread(100.0, 90.0, 110.0, 0.15, 1.0)) <= 0.02);
}

TEST_CASE("bsb call spread") {
  const UvmSpec u = uvm(payoffs::call_spread(90.0, 110.0));
  const Grid1D g = default_bsb_grid(u);
  const auto r = solve_bsb_1d(u, g);
  CHECK(r.converged);
  CHECK(std::abs(r.value - 11.20) <= 0.05);
  CHECK(std::abs(bsb_value(u, 800, 800) - r.value) <= 0.05);
}

TEST_CASE("bsb digital matches an explicit scheme") {
  const UvmSpec u = uvm(payoffs::digital(100.0, 100.0));
  const double reference = explicit_bsb(u, 1200, 1.6);
  const double implicit = bsb_value(u);
  MESSAGE("implicit " << implicit << " explicit " << reference);
  CHECK(std::abs(implicit - reference) <= 0.03);
  CHECK(std::abs(bsb_value(u, 800, 800) - implicit) <= 0.30);
}

TEST_CASE("bsb explicit oracle agrees on the call spread") {
  const UvmSpec u = uvm(payoffs::call_spread(90.0, 110.0));
  CHECK(std::abs(explicit_bsb(u, 1200, 1.6) - bsb_value(u)) <= 0.01);
}

TEST_CASE("convex payoff prices at the upper volatility") {
  const UvmSpec u = uvm(payoffs::call(100.0));
  CHECK(std::abs(bsb_value(u) - oracle::bs_call(100.0, 100.0, 0.2, 1.0)) <= 0.02);
}

TEST_CASE("enlarging the box never lowers the value") {
  for (const auto& payoff : {payoffs::call_spread(90.0, 110.0), payoffs::digital(100.0, 100.0),
                             payoffs::put(95.0)}) {
    const Grid1D g = default_bsb_grid(uvm(payoff, 0.08, 0.25));
    const double inner = solve_bsb_1d(uvm(payoff, 0.12, 0.18), g).value;
    const double middle = solve_bsb_1d(uvm(payoff, 0.1, 0.2), g).value;
    const double outer = solve_bsb_1d(uvm(payoff, 0.08, 0.25), g).value;
    CHECK(middle >= inner - 1e-6);
    CHECK(outer >= middle - 1e-6);
  }
}
