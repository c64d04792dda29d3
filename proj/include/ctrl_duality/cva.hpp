#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ctrl_duality/discretize.hpp"
#include "ctrl_duality/estimate.hpp"
#include "ctrl_duality/parallel.hpp"

namespace ctrl_duality {

enum class PhiPreset {
  discounted_delta,  ///< phi(t, x) = exp(-c (T - t))
  zero,
  custom,
};

/// Unilateral CVA with zero recovery: dX = sigma dW, default intensity c,
/// value sup_{a in [0, c]} E[exp(-int a) g(X_T)].
struct CvaSpec {
  double intensity = 0.1;
  double sigma = 1.0;
  double horizon = 1.0;
  double x0 = 0.0;
  double scale = 100.0;
  /// Widest sub-interval (years) on which the time-varying forcing is held
  /// constant; a value >= the Zakai step freezes phi* at the step's left end.
  double max_substep = 1.0 / 512.0;
  std::function<double(double)> payoff = [](double x) { return x; };
  PhiPreset phi_preset = PhiPreset::discounted_delta;
  std::function<double(double t, double x)> custom_phi;
  std::function<double(double t, double x)> custom_phi_dx;

  void validate() const;
  double phi(double t, double x) const;
  double phi_dx(double t, double x) const;
};

/// Piecewise-constant forcing of the pathwise Hamilton-Jacobi ODE on `grid`.
struct HjForcing {
  std::vector<double> alpha;
  std::vector<double> beta;
  TimeGrid grid;
};

/// Forcing along the piecewise-linear interpolation X^n of one Brownian path
/// (increments dw on `grid`): on each step the slope Wdot = dw / dt is
/// constant and phi*(t, X^n_t) is sampled at the left ends of
/// m = ceil(dt / spec.max_substep) equal sub-intervals per step, so the
/// returned grid has grid.intervals() * m intervals.
HjForcing zakai_forcing(const CvaSpec& spec, std::span<const double> dw, const TimeGrid& grid);

/// Exact backward solution of u' + c u^- + alpha + beta = 0, u(T) = terminal;
/// returns u(0).
double solve_hj(const HjForcing& forcing, double terminal, double intensity,
                const TimeGrid& grid);
inline double solve_hj(const HjForcing& forcing, double terminal, double intensity) {
  return solve_hj(forcing, terminal, intensity, forcing.grid);
}

/// One step of the exact flow: u at the left end of an interval of length
/// `length` with constant forcing f, given u at its right end.
double hj_step(double u_right, double f, double intensity, double length);

/// Scaled Monte-Carlo mean of u_omega(0) over N Brownian paths.
Estimate cva_dual(const CvaSpec& spec, const TimeGrid& grid, std::size_t paths,
                  std::uint64_t seed, Execution exec = Execution::parallel);

/// scale * sigma sqrt(T) (1 - exp(-c T)) / sqrt(2 pi): the phi = 0 value for
/// g(x) = x, X0 = 0.
double cva_exact_phizero(double intensity, double horizon, double sigma = 1.0,
                         double scale = 100.0);

}  // namespace ctrl_duality
