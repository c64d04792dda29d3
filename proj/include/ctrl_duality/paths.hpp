#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctrl_duality/discretize.hpp"
#include "ctrl_duality/parallel.hpp"

namespace ctrl_duality {

/// Seeded Brownian increments on a time grid. Increments of path p are a pure
/// function of (seed, p): `dz` holds independent N(0, dt) draws and `dw` the
/// correlated increments dw = L dz with L L^T = corr.
class NoiseBatch {
 public:
  NoiseBatch() = default;
  NoiseBatch(TimeGrid grid, std::size_t factors, Eigen::MatrixXd corr, std::size_t paths,
             std::uint64_t seed, Execution exec = Execution::parallel);

  std::uint64_t seed() const { return seed_; }
  std::size_t paths() const { return paths_; }
  std::size_t factors() const { return factors_; }
  const TimeGrid& grid() const { return grid_; }
  const Eigen::MatrixXd& correlation() const { return corr_; }
  std::span<const double> factor() const { return factor_; }

  /// Decorrelated increments of (path, step), one per factor.
  std::span<const double> dz(std::size_t path, std::size_t step) const {
    return {dz_.data() + offset(path, step), factors_};
  }
  /// Correlated increments of (path, step).
  std::span<const double> dw(std::size_t path, std::size_t step) const {
    return {dw_.data() + offset(path, step), factors_};
  }

 private:
  std::size_t offset(std::size_t path, std::size_t step) const {
    return (path * grid_.intervals() + step) * factors_;
  }

  TimeGrid grid_;
  std::size_t factors_ = 0;
  std::size_t paths_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd corr_;
  std::vector<double> factor_;  // row-major lower-triangular L
  std::vector<double> dz_;
  std::vector<double> dw_;
};

NoiseBatch sample_noise(const TimeGrid& grid, std::size_t factors, const Eigen::MatrixXd& corr,
                        std::size_t paths, std::uint64_t seed,
                        Execution exec = Execution::parallel);

/// Throws ConfigError naming the smallest eigenvalue when corr is not a
/// symmetric positive semi-definite matrix with unit diagonal.
void validate_correlation(const Eigen::MatrixXd& corr, double tol = 1e-12);

/// Lower-triangular L with L L^T = corr for a PSD correlation matrix of size
/// n (row-major in and out). Pivots below 1e-14 are treated as exact zeros.
void correlation_factor(std::span<const double> corr, std::size_t n, std::span<double> lower);

/// Builds the correlation matrix for UVM controls (sigma_1..sigma_d, rho_12,
/// rho_13, .., rho_{d-1,d}) into `corr` (row-major d x d).
void uvm_correlation(std::span<const double> control, std::size_t assets, std::span<double> corr);

/// Number of control coordinates of a d-asset UVM control.
inline std::size_t uvm_control_dim(std::size_t assets) { return assets + assets * (assets - 1) / 2; }

/// One trajectory: states at every grid instant.
class StatePath {
 public:
  StatePath() = default;
  StatePath(std::size_t instants, std::size_t dim) : dim_(dim), values_(instants * dim, 0.0) {}

  std::size_t instants() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> at(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<double> at(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> terminal() const { return at(instants() - 1); }

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// Many trajectories on one grid, path-major.
class StatePaths {
 public:
  StatePaths() = default;
  StatePaths(std::size_t paths, std::size_t instants, std::size_t dim)
      : paths_(paths), instants_(instants), dim_(dim), values_(paths * instants * dim, 0.0) {}

  std::size_t paths() const { return paths_; }
  std::size_t instants() const { return instants_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> at(std::size_t path, std::size_t i) const {
    return {values_.data() + (path * instants_ + i) * dim_, dim_};
  }
  std::span<double> at(std::size_t path, std::size_t i) {
    return {values_.data() + (path * instants_ + i) * dim_, dim_};
  }

 private:
  std::size_t paths_ = 0;
  std::size_t instants_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

enum class Dynamics {
  general,  ///< Euler-Maruyama on drift/vol callbacks
  uvm,      ///< dX^j = sigma^j X^j dW^j with control-driven correlation, exact lognormal steps
};

enum class PayoffKind { european, path_functional, american };

struct Payoff {
  PayoffKind kind = PayoffKind::european;
  /// g(x): terminal payoff (european) or exercise value at any instant (american).
  std::function<double(std::span<const double>)> terminal;
  /// g(omega) on the whole discrete trajectory (path_functional).
  std::function<double(const StatePath&)> functional;
};

using VectorField =
    std::function<void(double t, std::span<const double> a, std::span<const double> x,
                       std::span<double> out)>;
using ScalarField =
    std::function<double(double t, std::span<const double> a, std::span<const double> x)>;

/// Controlled diffusion dX = mu dt + sigma dB with reward f, discount rate r
/// and payoff g.
struct ModelSpec {
  std::size_t dim = 1;
  std::size_t factors = 1;
  std::vector<double> x0;
  Dynamics dynamics = Dynamics::general;
  VectorField drift;       ///< out has dim entries; empty means zero
  VectorField vol;         ///< out is dim x factors row-major
  ScalarField reward;      ///< f; empty means zero
  ScalarField rate;        ///< r; empty means zero
  Payoff payoff;
  ControlBox box;
  std::optional<double> cap = 1e6;
  /// mu and sigma do not depend on the state (required by path functionals).
  bool state_independent = false;

  /// Payoff clamped to [-cap, cap] when a cap is set.
  double capped(double value) const;
  double terminal_payoff(std::span<const double> x) const;
  double functional_payoff(const StatePath& path) const;
};

/// Scratch space reused across evolve calls on one thread.
struct EvolveScratch {
  std::vector<double> corr;
  std::vector<double> lower;
  std::vector<double> dw;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> prev_control;
};

/// Exact lognormal reference diffusion X^j_t = X^j_0 exp(-(s^j)^2 t/2 + s^j W^j_t)
/// driven by the batch's correlated increments.
StatePaths evolve_reference(const ModelSpec& model, std::span<const double> sigma_hat,
                            const NoiseBatch& batch, Execution exec = Execution::parallel);

/// Controlled trajectory of path p under the piecewise-constant control a.
StatePath evolve_controlled(const ModelSpec& model, const ControlPath& a, const NoiseBatch& batch,
                            std::size_t path);
void evolve_controlled(const ModelSpec& model, const ControlPath& a, const NoiseBatch& batch,
                       std::size_t path, StatePath& out, EvolveScratch& scratch);

/// Advances one step from x (in place) under control a on interval `step`.
/// `dz` are the decorrelated increments of that step.
void advance(const ModelSpec& model, double t, double dt, std::span<const double> a,
             std::span<const double> dz, std::span<const double> batch_dw, std::span<double> x,
             EvolveScratch& scratch);

/// R_{t_0} = 1, R_{t_{i+1}} = R_{t_i} exp(-r(t_i, a_i, X_{t_i}) dt_i).
std::vector<double> discount_factors(const ModelSpec& model, const ControlPath& a,
                                     const StatePath& path, const TimeGrid& grid);

/// Debug dump with columns path,time,asset,value.
void write_paths_csv(std::ostream& os, const StatePaths& paths, const TimeGrid& grid);

}  // namespace ctrl_duality
