#include "ctrl_duality/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ctrl_duality {
namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

}  // namespace

NelderMeadResult nelder_mead_maximize(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> start,
                                      std::span<const Interval> bounds,
                                      const NelderMeadOptions& options) {
  if (start.size() != bounds.size()) throw std::invalid_argument("nelder-mead: start/bounds size");
  const std::size_t full = start.size();

  // Only coordinates with positive width are searched.
  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < full; ++j) {
    if (bounds[j].width() > 0.0) free.push_back(j);
  }
  const std::size_t n = free.size();

  NelderMeadResult result;
  std::vector<double> point(start.begin(), start.end());
  for (std::size_t j = 0; j < full; ++j) point[j] = std::clamp(point[j], bounds[j].lo, bounds[j].hi);

  auto evaluate = [&](const std::vector<double>& y) {
    for (std::size_t j = 0; j < n; ++j) {
      point[free[j]] = std::clamp(y[j], bounds[free[j]].lo, bounds[free[j]].hi);
    }
    ++result.evaluations;
    return f(point);
  };
  auto project = [&](std::vector<double>& y) {
    for (std::size_t j = 0; j < n; ++j) y[j] = std::clamp(y[j], bounds[free[j]].lo, bounds[free[j]].hi);
  };

  if (n == 0) {
    result.x = point;
    ++result.evaluations;
    result.value = f(point);
    result.converged = true;
    return result;
  }

  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(n));
  std::vector<double> values(n + 1);
  for (std::size_t j = 0; j < n; ++j) simplex[0][j] = point[free[j]];
  for (std::size_t v = 1; v <= n; ++v) {
    simplex[v] = simplex[0];
    const std::size_t j = v - 1;
    const auto& b = bounds[free[j]];
    const double step = options.initial_step * b.width();
    simplex[v][j] += simplex[v][j] + step <= b.hi ? step : -step;
    project(simplex[v]);
  }
  for (std::size_t v = 0; v <= n; ++v) values[v] = evaluate(simplex[v]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    double diameter = 0.0;
    for (std::size_t v = 0; v <= n; ++v) {
      for (std::size_t j = 0; j < n; ++j) {
        diameter = std::max(diameter, std::abs(simplex[v][j] - simplex[best][j]) /
                                          bounds[free[j]].width());
      }
    }
    const double spread = values[best] - values[worst];
    if (spread <= options.f_tol * (1.0 + std::abs(values[best])) && diameter <= options.x_tol) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= options.max_evaluations) break;
    ++result.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v <= n; ++v) {
      if (v == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[v][j];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    for (std::size_t j = 0; j < n; ++j) {
      trial[j] = centroid[j] + kReflect * (centroid[j] - simplex[worst][j]);
    }
    project(trial);
    const double reflected = evaluate(trial);

    if (reflected > values[best]) {
      for (std::size_t j = 0; j < n; ++j) trial2[j] = centroid[j] + kExpand * (trial[j] - centroid[j]);
      project(trial2);
      const double expanded = evaluate(trial2);
      if (expanded > reflected) {
        simplex[worst] = trial2;
        values[worst] = expanded;
      } else {
        simplex[worst] = trial;
        values[worst] = reflected;
      }
      continue;
    }
    if (reflected > values[second]) {
      simplex[worst] = trial;
      values[worst] = reflected;
      continue;
    }

    // Contraction: outside if the reflected point beats the worst vertex.
    const bool outside = reflected > values[worst];
    const auto& toward = outside ? trial : simplex[worst];
    for (std::size_t j = 0; j < n; ++j) trial2[j] = centroid[j] + kContract * (toward[j] - centroid[j]);
    project(trial2);
    const double contracted = evaluate(trial2);
    if (contracted > (outside ? reflected : values[worst])) {
      simplex[worst] = trial2;
      values[worst] = contracted;
      continue;
    }

    for (std::size_t v = 0; v <= n; ++v) {
      if (v == best) continue;
      for (std::size_t j = 0; j < n; ++j) {
        simplex[v][j] = simplex[best][j] + kShrink * (simplex[v][j] - simplex[best][j]);
      }
      values[v] = evaluate(simplex[v]);
    }
  }

  const auto best = static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
  for (std::size_t j = 0; j < n; ++j) point[free[j]] = simplex[best][j];
  result.x = point;
  result.value = values[best];
  return result;
}

}  // namespace ctrl_duality
