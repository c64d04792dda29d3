#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ctrl_duality/discretize.hpp"

namespace ctrl_duality {

struct NelderMeadOptions {
  std::size_t max_evaluations = 2000;
  /// Stop when the spread of simplex values is below f_tol * (1 + |best|)
  /// and the simplex diameter is below x_tol (relative to the box width).
  double f_tol = 1e-10;
  double x_tol = 1e-6;
  /// Initial edge length as a fraction of each coordinate's width.
  double initial_step = 0.25;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Maximizes f over a box with the Nelder-Mead simplex method. Trial points
/// are projected onto the box before evaluation, so every evaluated point is
/// feasible with respect to the intervals.
NelderMeadResult nelder_mead_maximize(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> start,
                                      std::span<const Interval> bounds,
                                      const NelderMeadOptions& options = {});

}  // namespace ctrl_duality
