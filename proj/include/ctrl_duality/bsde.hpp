#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctrl_duality/discretize.hpp"
#include "ctrl_duality/parallel.hpp"
#include "ctrl_duality/paths.hpp"
#include "ctrl_duality/regress.hpp"

namespace ctrl_duality {

/// Uncertain volatility model: each asset's volatility lies in
/// [sigma_lo, sigma_hi] and every pairwise correlation in [rho_lo, rho_hi].
struct UvmSpec {
  std::size_t assets = 1;
  std::vector<double> x0{100.0};
  std::vector<double> sigma_lo{0.1};
  std::vector<double> sigma_hi{0.2};
  std::vector<double> sigma_hat{0.15};
  double rho_lo = 0.0;
  double rho_hi = 0.0;
  double rho_hat = 0.0;
  double horizon = 1.0;
  std::function<double(std::span<const double>)> payoff;

  /// Throws ConfigError naming the violated constraint.
  void validate() const;
  /// Control box in the layout (sigma_1..sigma_d, rho_12, ..).
  ControlBox box() const;
  Eigen::MatrixXd reference_correlation() const;
  ModelSpec model() const;
};

/// 1/2 sum_{jk} rho^{jk} sigma^j sigma^k x^j x^k gamma^{jk} for a UVM control
/// (gamma row-major d x d).
double uvm_quadratic(std::span<const double> control, std::span<const double> x,
                     std::span<const double> gamma, std::size_t assets);

struct HamiltonianResult {
  double value = 0.0;
  std::vector<double> control;
};

/// H(x, gamma) = max over the box of uvm_quadratic, with its argmax. Exact for
/// d <= 2 (ties go to the lexicographically smallest control). For d > 2 the
/// volatilities are searched on a 9-point grid per asset (endpoints included)
/// and each correlation at its endpoints.
HamiltonianResult hamiltonian(const UvmSpec& spec, std::span<const double> x,
                              std::span<const double> gamma);
double hamiltonian(const UvmSpec& spec, std::span<const double> x, std::span<const double> gamma,
                   std::span<double> argmax);

/// Regressed value, delta and gamma on one interval [t_i, t_{i+1}).
struct BsdeStep {
  RegressedFn value;              ///< E_i[Y_{t_{i+1}}]
  std::vector<RegressedFn> delta; ///< Z^j, one per asset
  std::vector<RegressedFn> gamma; ///< Gamma^{jk}, upper triangle j <= k, row by row
  /// Clamp window on x^j x^k Gamma^{jk}, per upper-triangle component.
  std::vector<Interval> gamma_window;
  /// max over paths of |H - linear term| / max(|H|, tiny) at this step.
  double correction_ratio = 0.0;
};

class BsdeSolution {
 public:
  BsdeSolution() = default;
  BsdeSolution(std::size_t assets, TimeGrid grid, std::vector<BsdeStep> steps, double y0,
               double y0_error)
      : assets_(assets), grid_(std::move(grid)), steps_(std::move(steps)), y0_(y0),
        y0_error_(y0_error) {}

  double y0() const { return y0_; }
  double y0_error() const { return y0_error_; }
  std::size_t assets() const { return assets_; }
  const TimeGrid& grid() const { return grid_; }
  const std::vector<BsdeStep>& steps() const { return steps_; }

  /// Z_{t_i}(x).
  void delta(std::size_t step, std::span<const double> x, std::span<double> out) const;
  /// Symmetric, clamped Gamma_{t_i}(x), row-major d x d.
  void gamma(std::size_t step, std::span<const double> x, std::span<double> out) const;

  void write(std::ostream& os) const;
  static BsdeSolution read(std::istream& is);

 private:
  std::size_t assets_ = 0;
  TimeGrid grid_;
  std::vector<BsdeStep> steps_;
  double y0_ = 0.0;
  double y0_error_ = 0.0;
};

struct BsdeOptions {
  FitOptions fit;
  /// Empirical quantile for the gamma clamp window (0 disables clamping).
  double clamp_quantile = 0.001;
  /// Multiply the Malliavin weights by Y - E_{i-1}[Y] instead of Y.
  bool center_weights = true;
  Execution exec = Execution::parallel;
};

/// Backward regression scheme for the 2BSDE of the UVM on the batch's grid.
/// The batch must carry the reference correlation.
BsdeSolution backward_sweep(const UvmSpec& spec, const NoiseBatch& batch, const BasisSpec& basis,
                            const BsdeOptions& options = {});

/// Index of the (upper-triangle) gamma component for j <= k.
inline std::size_t gamma_index(std::size_t j, std::size_t k, std::size_t d) {
  return j * d - j * (j - 1) / 2 + (k - j);
}

}  // namespace ctrl_duality
