#pragma once

#include <cstddef>
#include <span>

#include "ctrl_duality/bsde.hpp"
#include "ctrl_duality/cva.hpp"

namespace ctrl_duality {

enum class Boundary {
  payoff_value,            ///< node keeps the terminal payoff value
  zero_second_derivative,  ///< diffusion switched off at the node
};

/// Uniform 1-D grid. For the BSB solver the coordinate is log(x).
struct Grid1D {
  std::size_t nodes = 400;
  std::size_t steps = 400;
  double lo = 0.0;
  double hi = 0.0;
  Boundary left = Boundary::zero_second_derivative;
  Boundary right = Boundary::zero_second_derivative;

  double spacing() const { return (hi - lo) / static_cast<double>(nodes - 1); }
};

struct PdeResult {
  double value = 0.0;
  Grid1D grid;
  /// Total policy-iteration sweeps (BSB) or time steps (CVA).
  std::size_t iterations = 0;
  /// False when some step's policy iteration hit the sweep cap.
  bool converged = true;
};

/// Default CVA grid: X0 +/- 8 sigma sqrt(T), 400 x 400.
Grid1D default_cva_grid(const CvaSpec& spec);
/// Default BSB grid: log X0 +/- 8 sigma_hi sqrt(T), 400 x 400.
Grid1D default_bsb_grid(const UvmSpec& spec);

/// Crank-Nicolson for d_t u + 1/2 sigma^2 u_xx + c u^- = 0 with the
/// reaction term lagged; value at X0 scaled by spec.scale.
PdeResult solve_cva_pde(const CvaSpec& spec, const Grid1D& grid);

/// Implicit Black-Scholes-Barenblatt solver with Howard policy iteration
/// over {sigma_lo^2, sigma_hi^2}. The terminal condition is the cell average
/// of the payoff, which smooths discontinuities over one cell.
PdeResult solve_bsb_1d(const UvmSpec& spec, const Grid1D& grid, std::size_t max_sweeps = 10);

/// Solves a tridiagonal system in place (Thomas algorithm); `rhs` becomes the
/// solution.
void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs);

}  // namespace ctrl_duality
