#include "ctrl_duality/cva.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/paths.hpp"
#include "ctrl_duality/stats.hpp"

namespace ctrl_duality {

void CvaSpec::validate() const {
  if (!(intensity >= 0.0)) throw ConfigError("cva: intensity c must be >= 0");
  if (!(horizon > 0.0)) throw ConfigError("cva: horizon T must be positive");
  if (!(sigma > 0.0)) throw ConfigError("cva: sigma must be positive");
  if (!(scale > 0.0)) throw ConfigError("cva: scale must be positive");
  if (!(max_substep > 0.0)) throw ConfigError("cva: max_substep must be positive");
  if (!payoff) throw ConfigError("cva: payoff is not set");
  if (phi_preset == PhiPreset::custom && (!custom_phi || !custom_phi_dx)) {
    throw ConfigError("cva: custom phi needs both phi and its x-derivative");
  }
}

double CvaSpec::phi(double t, double x) const {
  switch (phi_preset) {
    case PhiPreset::discounted_delta:
      return std::exp(-intensity * (horizon - t));
    case PhiPreset::zero:
      return 0.0;
    case PhiPreset::custom:
      return custom_phi(t, x);
  }
  return 0.0;
}

double CvaSpec::phi_dx(double t, double x) const {
  return phi_preset == PhiPreset::custom ? custom_phi_dx(t, x) : 0.0;
}

HjForcing zakai_forcing(const CvaSpec& spec, std::span<const double> dw, const TimeGrid& grid) {
  const std::size_t n = grid.intervals();
  const auto m = static_cast<std::size_t>(
      std::max(1.0, std::ceil(grid.mesh() / spec.max_substep - 1e-9)));
  HjForcing f{std::vector<double>(n * m), std::vector<double>(n * m), TimeGrid(grid.horizon(), n * m)};
  double x = spec.x0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = grid.time(i);
    const double dt = grid.step(i);
    const double slope = dw[i] / dt;
    for (std::size_t q = 0; q < m; ++q) {
      const double frac = static_cast<double>(q) / static_cast<double>(m);
      const double s = t + frac * dt;
      const double xs = x + spec.sigma * dw[i] * frac;
      f.alpha[i * m + q] = -spec.phi(s, xs) * spec.sigma * slope;
      f.beta[i * m + q] = 0.5 * spec.phi_dx(s, xs) * spec.sigma * spec.sigma;
    }
    x += spec.sigma * dw[i];
  }
  return f;
}

namespace {

// u at distance s to the left of a point where u = u0 < 0 (negative branch).
double negative_flow(double u0, double f, double c, double s) {
  const double growth = c > 0.0 ? -std::expm1(-c * s) / c : s;
  return std::exp(-c * s) * u0 + f * growth;
}

double bisect_zero(double u0, double f, double c, double hi) {
  double lo = 0.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (negative_flow(u0, f, c, mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double hj_step(double u_right, double f, double intensity, double length) {
  const double c = intensity;
  double u = u_right;
  double remaining = length;
  // At most one sign change per interval: the flow with constant forcing is
  // monotone on each branch.
  for (int pass = 0; pass < 2; ++pass) {
    if (u > 0.0 || (u == 0.0 && f > 0.0)) {
      if (f >= 0.0) return u + f * remaining;
      const double s = u / -f;
      if (s >= remaining) return u + f * remaining;
      u = 0.0;
      remaining -= s;
    } else if (u < 0.0 || (u == 0.0 && f < 0.0)) {
      if (f <= 0.0) return negative_flow(u, f, c, remaining);
      double s = c > 0.0 ? std::log1p(-c * u / f) / c : -u / f;
      if (!std::isfinite(s) || s < 0.0) s = bisect_zero(u, f, c, remaining);
      if (s >= remaining) return negative_flow(u, f, c, remaining);
      u = 0.0;
      remaining -= s;
    } else {
      return 0.0;
    }
  }
  return u + f * remaining;
}

double solve_hj(const HjForcing& forcing, double terminal, double intensity,
                const TimeGrid& grid) {
  double u = terminal;
  for (std::size_t i = grid.intervals(); i-- > 0;) {
    u = hj_step(u, forcing.alpha[i] + forcing.beta[i], intensity, grid.step(i));
  }
  return u;
}

Estimate cva_dual(const CvaSpec& spec, const TimeGrid& grid, std::size_t paths,
                  std::uint64_t seed, Execution exec) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const NoiseBatch batch = sample_noise(grid, 1, Eigen::MatrixXd::Identity(1, 1), paths, seed, exec);
  const std::size_t n = grid.intervals();
  std::vector<double> values(paths);
  for_each_index(exec, paths, [&](std::size_t p) {
    std::vector<double> dw(n);
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dw[i] = batch.dw(p, i)[0];
      w += dw[i];
    }
    const HjForcing forcing = zakai_forcing(spec, dw, grid);
    const double terminal = spec.payoff(spec.x0 + spec.sigma * w);
    values[p] = spec.scale * solve_hj(forcing, terminal, spec.intensity);
  });
  const auto s = sample_stats(values);
  Estimate e;
  e.mean = s.mean;
  e.std_error = s.std_error;
  e.paths = paths;
  e.seed = seed;
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return e;
}

double cva_exact_phizero(double intensity, double horizon, double sigma, double scale) {
  return scale * sigma * std::sqrt(horizon) * (-std::expm1(-intensity * horizon)) /
         std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace ctrl_duality
