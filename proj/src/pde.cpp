#include "ctrl_duality/pde.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ctrl_duality/errors.hpp"

namespace ctrl_duality {

void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c(n);
  double denom = diag[0];
  c[0] = upper[0] / denom;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag[i] - lower[i] * c[i - 1];
    c[i] = i + 1 < n ? upper[i] / denom : 0.0;
    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

namespace {

void check_grid(const Grid1D& grid, double centre, double spread, const char* what) {
  if (grid.nodes < 3) throw ConfigError(std::string(what) + ": grid needs at least 3 nodes");
  if (grid.steps < 1) throw ConfigError(std::string(what) + ": grid needs at least 1 time step");
  if (!(grid.hi > grid.lo)) throw ConfigError(std::string(what) + ": grid bounds must satisfy lo < hi");
  if (centre - grid.lo < 5.0 * spread || grid.hi - centre < 5.0 * spread) {
    throw ConfigError(std::string(what) + ": grid must bracket the initial state by 5 standard deviations");
  }
}

double interpolate(const std::vector<double>& u, const Grid1D& grid, double at) {
  const double h = grid.spacing();
  const double pos = (at - grid.lo) / h;
  const auto j = std::min(static_cast<std::size_t>(std::floor(pos)), grid.nodes - 2);
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * u[j] + w * u[j + 1];
}

void check_finite(const std::vector<double>& u, double bound, const char* what) {
  for (double v : u) {
    if (!std::isfinite(v) || std::abs(v) > bound) {
      throw NumericalError(std::string(what) + ": solution blew up; increase the number of time steps");
    }
  }
}

}  // namespace

Grid1D default_cva_grid(const CvaSpec& spec) {
  Grid1D g;
  const double width = 8.0 * spec.sigma * std::sqrt(spec.horizon);
  g.lo = spec.x0 - width;
  g.hi = spec.x0 + width;
  return g;
}

Grid1D default_bsb_grid(const UvmSpec& spec) {
  Grid1D g;
  const double width = 8.0 * spec.sigma_hi[0] * std::sqrt(spec.horizon);
  g.lo = std::log(spec.x0[0]) - width;
  g.hi = std::log(spec.x0[0]) + width;
  return g;
}

PdeResult solve_cva_pde(const CvaSpec& spec, const Grid1D& grid) {
  spec.validate();
  check_grid(grid, spec.x0, spec.sigma * std::sqrt(spec.horizon), "cva pde");
  const std::size_t n = grid.nodes;
  const double h = grid.spacing();
  const double dt = spec.horizon / static_cast<double>(grid.steps);
  const double k = 0.5 * spec.sigma * spec.sigma / (h * h);
  const double c = spec.intensity;

  std::vector<double> x(n), u(n), g(n);
  double bound = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = grid.lo + h * static_cast<double>(j);
    g[j] = u[j] = spec.payoff(x[j]);
    bound = std::max(bound, std::abs(g[j]));
  }
  bound = 1e6 * (1.0 + bound);

  std::vector<double> lower(n, 0.0), diag(n, 1.0), upper(n, 0.0), rhs(n);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    lower[j] = -0.5 * dt * k;
    diag[j] = 1.0 + dt * k;
    upper[j] = -0.5 * dt * k;
  }

  for (std::size_t step = 0; step < grid.steps; ++step) {
    for (std::size_t j = 0; j < n; ++j) {
      const double reaction = dt * c * std::max(0.0, -u[j]);
      if (j == 0 || j + 1 == n) {
        const Boundary b = j == 0 ? grid.left : grid.right;
        rhs[j] = b == Boundary::payoff_value ? g[j] : u[j] + reaction;
      } else {
        rhs[j] = u[j] + 0.5 * dt * k * (u[j + 1] - 2.0 * u[j] + u[j - 1]) + reaction;
      }
    }
    solve_tridiagonal(lower, diag, upper, rhs);
    u.swap(rhs);
    check_finite(u, bound, "cva pde");
  }

  PdeResult r;
  r.value = spec.scale * interpolate(u, grid, spec.x0);
  r.grid = grid;
  r.iterations = grid.steps;
  return r;
}

PdeResult solve_bsb_1d(const UvmSpec& spec, const Grid1D& grid, std::size_t max_sweeps) {
  spec.validate();
  if (spec.assets != 1) throw ConfigError("bsb pde: only one asset is supported");
  const double y0 = std::log(spec.x0[0]);
  check_grid(grid, y0, spec.sigma_hi[0] * std::sqrt(spec.horizon), "bsb pde");
  const std::size_t n = grid.nodes;
  const double h = grid.spacing();
  const double dt = spec.horizon / static_cast<double>(grid.steps);
  const double lo2 = spec.sigma_lo[0] * spec.sigma_lo[0];
  const double hi2 = spec.sigma_hi[0] * spec.sigma_hi[0];

  // Terminal values are cell averages of the payoff (midpoint rule in y).
  constexpr int kSub = 64;
  std::vector<double> u(n), g(n);
  double bound = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double yc = grid.lo + h * static_cast<double>(j);
    double acc = 0.0;
    for (int q = 0; q < kSub; ++q) {
      const double y = yc + h * ((q + 0.5) / kSub - 0.5);
      const double xs[1] = {std::exp(y)};
      acc += spec.payoff(xs);
    }
    g[j] = u[j] = acc / kSub;
    bound = std::max(bound, std::abs(g[j]));
  }
  bound = 1e6 * (1.0 + bound);

  // x^2 u_xx in log coordinates: u_yy - u_y.
  auto dollar_gamma = [h](const std::vector<double>& v, std::size_t j) {
    return (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h) - (v[j + 1] - v[j - 1]) / (2.0 * h);
  };

  std::vector<double> policy(n, hi2), trial(n), lower(n), diag(n), upper(n);
  PdeResult r;
  r.grid = grid;
  for (std::size_t step = 0; step < grid.steps; ++step) {
    for (std::size_t j = 1; j + 1 < n; ++j) policy[j] = dollar_gamma(u, j) > 0.0 ? hi2 : lo2;
    bool stable = false;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
      ++r.iterations;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == 0 || j + 1 == n) {
          const Boundary b = j == 0 ? grid.left : grid.right;
          lower[j] = upper[j] = 0.0;
          diag[j] = 1.0;
          trial[j] = b == Boundary::payoff_value ? g[j] : u[j];
          continue;
        }
        const double a = 0.5 * policy[j] * dt;
        lower[j] = -a * (1.0 / (h * h) + 1.0 / (2.0 * h));
        upper[j] = -a * (1.0 / (h * h) - 1.0 / (2.0 * h));
        diag[j] = 1.0 + 2.0 * a / (h * h);
        trial[j] = u[j];
      }
      solve_tridiagonal(lower, diag, upper, trial);
      bool changed = false;
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const double next = dollar_gamma(trial, j) > 0.0 ? hi2 : lo2;
        if (next != policy[j]) {
          policy[j] = next;
          changed = true;
        }
      }
      if (!changed) {
        stable = true;
        break;
      }
    }
    r.converged = r.converged && stable;
    u = trial;
    check_finite(u, bound, "bsb pde");
  }
  r.value = interpolate(u, grid, y0);
  return r;
}

}  // namespace ctrl_duality
