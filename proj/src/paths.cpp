#include "ctrl_duality/paths.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/rng.hpp"

namespace ctrl_duality {

void validate_correlation(const Eigen::MatrixXd& corr, double tol) {
  if (corr.rows() != corr.cols() || corr.rows() == 0) {
    throw ConfigError("correlation matrix must be square and nonempty");
  }
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    if (std::abs(corr(i, i) - 1.0) > tol) {
      throw ConfigError("correlation matrix must have a unit diagonal");
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(corr(i, j) - corr(j, i)) > tol) {
        throw ConfigError("correlation matrix must be symmetric");
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  if (smallest < -tol) {
    std::ostringstream msg;
    msg << "correlation matrix is not positive semi-definite: smallest eigenvalue " << smallest;
    throw ConfigError(msg.str());
  }
}

void correlation_factor(std::span<const double> corr, std::size_t n, std::span<double> lower) {
  std::fill(lower.begin(), lower.begin() + static_cast<std::ptrdiff_t>(n * n), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = corr[j * n + j];
    for (std::size_t k = 0; k < j; ++k) s -= lower[j * n + k] * lower[j * n + k];
    if (s <= 1e-14) continue;  // semi-definite direction: column stays zero
    const double pivot = std::sqrt(s);
    lower[j * n + j] = pivot;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = corr[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= lower[i * n + k] * lower[j * n + k];
      lower[i * n + j] = v / pivot;
    }
  }
}

void uvm_correlation(std::span<const double> control, std::size_t assets, std::span<double> corr) {
  std::size_t idx = assets;
  for (std::size_t j = 0; j < assets; ++j) {
    corr[j * assets + j] = 1.0;
    for (std::size_t k = j + 1; k < assets; ++k) {
      corr[j * assets + k] = corr[k * assets + j] = control[idx++];
    }
  }
}

namespace {

// dw = L dz with the same summation order everywhere, so identical factors
// give bit-identical increments.
inline void correlate(std::span<const double> lower, std::size_t n, std::span<const double> dz,
                      std::span<double> dw) {
  for (std::size_t j = 0; j < n; ++j) {
    double v = 0.0;
    for (std::size_t k = 0; k <= j; ++k) v += lower[j * n + k] * dz[k];
    dw[j] = v;
  }
}

}  // namespace

NoiseBatch::NoiseBatch(TimeGrid grid, std::size_t factors, Eigen::MatrixXd corr,
                       std::size_t paths, std::uint64_t seed, Execution exec)
    : grid_(std::move(grid)), factors_(factors), paths_(paths), seed_(seed), corr_(std::move(corr)) {
  if (factors_ == 0) throw ConfigError("noise: factor count must be at least 1");
  if (static_cast<std::size_t>(corr_.rows()) != factors_) {
    throw ConfigError("noise: correlation matrix size does not match the factor count");
  }
  validate_correlation(corr_);
  std::vector<double> flat(factors_ * factors_);
  for (std::size_t i = 0; i < factors_; ++i) {
    for (std::size_t j = 0; j < factors_; ++j) flat[i * factors_ + j] = corr_(i, j);
  }
  factor_.resize(factors_ * factors_);
  correlation_factor(flat, factors_, factor_);

  const std::size_t steps = grid_.intervals();
  dz_.resize(paths_ * steps * factors_);
  dw_.resize(dz_.size());
  for_each_index(exec, paths_, [&](std::size_t p) {
    const PathStream stream(seed_, p);
    for (std::size_t i = 0; i < steps; ++i) {
      const double root_dt = std::sqrt(grid_.step(i));
      double* z = dz_.data() + offset(p, i);
      for (std::size_t j = 0; j < factors_; ++j) z[j] = root_dt * stream.normal(i * factors_ + j);
      correlate(factor_, factors_, {z, factors_}, {dw_.data() + offset(p, i), factors_});
    }
  });
}

NoiseBatch sample_noise(const TimeGrid& grid, std::size_t factors, const Eigen::MatrixXd& corr,
                        std::size_t paths, std::uint64_t seed, Execution exec) {
  return NoiseBatch(grid, factors, corr, paths, seed, exec);
}

double ModelSpec::capped(double value) const {
  if (!cap) return value;
  return std::clamp(value, -*cap, *cap);
}

double ModelSpec::terminal_payoff(std::span<const double> x) const {
  return capped(payoff.terminal(x));
}

double ModelSpec::functional_payoff(const StatePath& path) const {
  return capped(payoff.functional(path));
}

StatePaths evolve_reference(const ModelSpec& model, std::span<const double> sigma_hat,
                            const NoiseBatch& batch, Execution exec) {
  if (model.dynamics != Dynamics::uvm) {
    throw std::invalid_argument("evolve_reference: model must have UVM dynamics");
  }
  const std::size_t d = model.dim;
  if (sigma_hat.size() != d || batch.factors() != d) {
    throw std::invalid_argument("evolve_reference: dimension mismatch");
  }
  const auto& grid = batch.grid();
  const std::size_t steps = grid.intervals();
  StatePaths out(batch.paths(), steps + 1, d);
  for_each_index(exec, batch.paths(), [&](std::size_t p) {
    std::vector<double> w(d, 0.0);
    std::copy(model.x0.begin(), model.x0.end(), out.at(p, 0).begin());
    for (std::size_t i = 0; i < steps; ++i) {
      const auto dw = batch.dw(p, i);
      const double t = grid.time(i + 1);
      auto x = out.at(p, i + 1);
      for (std::size_t j = 0; j < d; ++j) {
        w[j] += dw[j];
        x[j] = model.x0[j] * std::exp(-sigma_hat[j] * sigma_hat[j] * t / 2.0 + sigma_hat[j] * w[j]);
      }
    }
  });
  return out;
}

void advance(const ModelSpec& model, double t, double dt, std::span<const double> a,
             std::span<const double> dz, std::span<const double> batch_dw, std::span<double> x,
             EvolveScratch& scratch) {
  const std::size_t d = model.dim;
  if (model.dynamics == Dynamics::uvm) {
    scratch.dw.resize(d);
    if (d == 1) {
      scratch.dw[0] = dz[0];
    } else {
      const std::size_t k = a.size();
      const bool same = scratch.prev_control.size() == k &&
                        std::equal(a.begin() + static_cast<std::ptrdiff_t>(d), a.end(),
                                   scratch.prev_control.begin() + static_cast<std::ptrdiff_t>(d));
      if (!same) {
        scratch.corr.resize(d * d);
        scratch.lower.resize(d * d);
        uvm_correlation(a, d, scratch.corr);
        correlation_factor(scratch.corr, d, scratch.lower);
        scratch.prev_control.assign(a.begin(), a.end());
      }
      correlate(scratch.lower, d, dz, scratch.dw);
    }
    for (std::size_t j = 0; j < d; ++j) {
      x[j] *= std::exp(-a[j] * a[j] * dt / 2.0 + a[j] * scratch.dw[j]);
    }
    return;
  }

  const std::size_t m = model.factors;
  scratch.mu.assign(d, 0.0);
  scratch.sigma.assign(d * m, 0.0);
  if (model.drift) model.drift(t, a, x, scratch.mu);
  if (model.vol) model.vol(t, a, x, scratch.sigma);
  for (std::size_t j = 0; j < d; ++j) {
    double v = scratch.mu[j] * dt;
    for (std::size_t k = 0; k < m; ++k) v += scratch.sigma[j * m + k] * batch_dw[k];
    x[j] += v;
  }
}

void evolve_controlled(const ModelSpec& model, const ControlPath& a, const NoiseBatch& batch,
                       std::size_t path, StatePath& out, EvolveScratch& scratch) {
  const auto& grid = batch.grid();
  const std::size_t steps = grid.intervals();
  if (out.instants() != steps + 1 || out.dim() != model.dim) out = StatePath(steps + 1, model.dim);
  std::copy(model.x0.begin(), model.x0.end(), out.at(0).begin());
  for (std::size_t i = 0; i < steps; ++i) {
    auto next = out.at(i + 1);
    const auto prev = out.at(i);
    std::copy(prev.begin(), prev.end(), next.begin());
    advance(model, grid.time(i), grid.step(i), a.at(i), batch.dz(path, i), batch.dw(path, i), next,
            scratch);
  }
}

StatePath evolve_controlled(const ModelSpec& model, const ControlPath& a, const NoiseBatch& batch,
                            std::size_t path) {
  if (a.intervals() != batch.grid().intervals()) {
    throw std::invalid_argument("evolve_controlled: control path length does not match the grid");
  }
  for (std::size_t i = 0; i < a.intervals(); ++i) {
    if (!model.box.contains(a.at(i))) {
      throw std::domain_error("evolve_controlled: control outside the box on interval " +
                              std::to_string(i));
    }
  }
  StatePath out;
  EvolveScratch scratch;
  evolve_controlled(model, a, batch, path, out, scratch);
  return out;
}

std::vector<double> discount_factors(const ModelSpec& model, const ControlPath& a,
                                     const StatePath& path, const TimeGrid& grid) {
  const std::size_t steps = grid.intervals();
  std::vector<double> r(steps + 1, 1.0);
  if (!model.rate) return r;
  for (std::size_t i = 0; i < steps; ++i) {
    r[i + 1] = r[i] * std::exp(-model.rate(grid.time(i), a.at(i), path.at(i)) * grid.step(i));
  }
  return r;
}

void write_paths_csv(std::ostream& os, const StatePaths& paths, const TimeGrid& grid) {
  os << "path,time,asset,value\n";
  const auto old = os.precision(17);
  for (std::size_t p = 0; p < paths.paths(); ++p) {
    for (std::size_t i = 0; i < paths.instants(); ++i) {
      const auto x = paths.at(p, i);
      for (std::size_t j = 0; j < x.size(); ++j) {
        os << p << ',' << grid.time(i) << ',' << j << ',' << x[j] << '\n';
      }
    }
  }
  os.precision(old);
}

}  // namespace ctrl_duality
