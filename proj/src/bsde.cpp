#include "ctrl_duality/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/stats.hpp"

namespace ctrl_duality {

void UvmSpec::validate() const {
  if (assets == 0) throw ConfigError("uvm: assets must be at least 1");
  if (x0.size() != assets || sigma_lo.size() != assets || sigma_hi.size() != assets ||
      sigma_hat.size() != assets) {
    throw ConfigError("uvm: x0, sigma_lo, sigma_hi and sigma_hat need one entry per asset");
  }
  if (!(horizon > 0.0)) throw ConfigError("uvm: horizon must be positive");
  for (std::size_t j = 0; j < assets; ++j) {
    const std::string asset = " for asset " + std::to_string(j);
    if (!(x0[j] > 0.0)) throw ConfigError("uvm: x0 must be positive" + asset);
    if (sigma_lo[j] < 0.0) throw ConfigError("uvm: sigma_lo must be >= 0" + asset);
    if (sigma_lo[j] > sigma_hi[j]) throw ConfigError("uvm: sigma_lo > sigma_hi" + asset);
    if (sigma_hat[j] < sigma_lo[j] || sigma_hat[j] > sigma_hi[j]) {
      throw ConfigError("uvm: sigma_hat outside [sigma_lo, sigma_hi]" + asset);
    }
    if (!(sigma_hat[j] > 0.0)) throw ConfigError("uvm: sigma_hat must be > 0" + asset);
  }
  if (assets > 1) {
    if (rho_lo < -1.0 || rho_hi > 1.0) throw ConfigError("uvm: correlation bounds must lie in [-1, 1]");
    if (rho_lo > rho_hi) throw ConfigError("uvm: rho_lo > rho_hi");
    if (rho_hat < rho_lo || rho_hat > rho_hi) throw ConfigError("uvm: rho_hat outside [rho_lo, rho_hi]");
    if (std::abs(rho_hat) >= 1.0) throw ConfigError("uvm: reference correlation must be invertible (|rho_hat| < 1)");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reference_correlation(), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 1e-12) {
      throw ConfigError("uvm: reference correlation matrix is not positive definite");
    }
  }
  if (!payoff) throw ConfigError("uvm: payoff is not set");
}

ControlBox UvmSpec::box() const {
  std::vector<Interval> coords;
  for (std::size_t j = 0; j < assets; ++j) coords.push_back({sigma_lo[j], sigma_hi[j]});
  for (std::size_t p = 0; p < assets * (assets - 1) / 2; ++p) coords.push_back({rho_lo, rho_hi});
  return ControlBox(std::move(coords), correlation_feasibility(assets));
}

Eigen::MatrixXd UvmSpec::reference_correlation() const {
  const auto n = static_cast<Eigen::Index>(assets);
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(n, n, rho_hat);
  corr.diagonal().setOnes();
  return corr;
}

ModelSpec UvmSpec::model() const {
  ModelSpec m;
  m.dim = assets;
  m.factors = assets;
  m.x0 = x0;
  m.dynamics = Dynamics::uvm;
  m.payoff.kind = PayoffKind::european;
  m.payoff.terminal = payoff;
  m.box = box();
  return m;
}

double uvm_quadratic(std::span<const double> control, std::span<const double> x,
                     std::span<const double> gamma, std::size_t d) {
  double diag = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double sx = control[j] * x[j];
    diag += sx * sx * gamma[j * d + j];
  }
  double cross = 0.0;
  std::size_t idx = d;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j + 1; k < d; ++k) {
      const double g = 0.5 * (gamma[j * d + k] + gamma[k * d + j]);
      cross += control[idx++] * control[j] * x[j] * control[k] * x[k] * g;
    }
  }
  return 0.5 * (diag + 2.0 * cross);
}

namespace {

void push_unique(std::vector<double>& v, double value) {
  if (std::find(v.begin(), v.end(), value) == v.end()) v.push_back(value);
}

// Candidate values of sigma_j given the other asset fixed at `other`.
std::vector<double> sigma_candidates(const Interval& box, double a_coef, double e_coef,
                                     double other) {
  std::vector<double> c{box.lo};
  push_unique(c, box.hi);
  if (a_coef < 0.0) {
    const double s = -e_coef * other / a_coef;
    if (s > box.lo && s < box.hi) push_unique(c, s);
  }
  return c;
}

}  // namespace

double hamiltonian(const UvmSpec& spec, std::span<const double> x, std::span<const double> gamma,
                   std::span<double> argmax) {
  const std::size_t d = spec.assets;
  const std::size_t k = uvm_control_dim(d);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> control(k);
  bool found = false;
  // Candidates are visited in lexicographic order and only a strictly larger
  // value replaces the incumbent.
  std::vector<std::vector<double>> candidates;

  if (d == 1) {
    const Interval box{spec.sigma_lo[0], spec.sigma_hi[0]};
    auto c = sigma_candidates(box, x[0] * x[0] * gamma[0], 0.0, 0.0);
    for (double s : c) candidates.push_back({s});
  } else if (d == 2) {
    const Interval b1{spec.sigma_lo[0], spec.sigma_hi[0]};
    const Interval b2{spec.sigma_lo[1], spec.sigma_hi[1]};
    const double a = x[0] * x[0] * gamma[0];
    const double b = x[1] * x[1] * gamma[3];
    std::vector<double> rhos{spec.rho_lo};
    push_unique(rhos, spec.rho_hi);
    for (double rho : rhos) {
      const double e = rho * x[0] * x[1] * 0.5 * (gamma[1] + gamma[2]);
      std::vector<std::pair<double, double>> pts;
      for (double s1 : {b1.lo, b1.hi}) {
        for (double s2 : sigma_candidates(b2, b, e, s1)) pts.emplace_back(s1, s2);
      }
      for (double s2 : {b2.lo, b2.hi}) {
        for (double s1 : sigma_candidates(b1, a, e, s2)) pts.emplace_back(s1, s2);
      }
      for (auto [s1, s2] : pts) candidates.push_back({s1, s2, rho});
    }
  } else {
    constexpr std::size_t kGrid = 9;
    const std::size_t pairs = k - d;
    std::vector<std::size_t> digit(k, 0);
    const auto axis = [&](std::size_t c, std::size_t i) {
      if (c < d) {
        return spec.sigma_lo[c] + (spec.sigma_hi[c] - spec.sigma_lo[c]) * static_cast<double>(i) /
                                      static_cast<double>(kGrid - 1);
      }
      return i == 0 ? spec.rho_lo : spec.rho_hi;
    };
    std::size_t total = 1;
    for (std::size_t c = 0; c < d; ++c) total *= kGrid;
    for (std::size_t c = 0; c < pairs; ++c) total *= 2;
    const auto feasible = correlation_feasibility(d);
    for (std::size_t n = 0; n < total; ++n) {
      std::size_t rest = n;
      for (std::size_t c = k; c-- > 0;) {
        const std::size_t radix = c < d ? kGrid : 2;
        control[c] = axis(c, rest % radix);
        rest /= radix;
      }
      if (feasible && !feasible(control)) continue;
      const double v = uvm_quadratic(control, x, gamma, d);
      if (!found || v > best) {
        best = v;
        std::copy(control.begin(), control.end(), argmax.begin());
        found = true;
      }
    }
    if (!found) throw NumericalError("hamiltonian: no feasible control on the search grid");
    return best;
  }

  std::sort(candidates.begin(), candidates.end());
  for (const auto& c : candidates) {
    const double v = uvm_quadratic(c, x, gamma, d);
    if (!found || v > best) {
      best = v;
      std::copy(c.begin(), c.end(), argmax.begin());
      found = true;
    }
  }
  return best;
}

HamiltonianResult hamiltonian(const UvmSpec& spec, std::span<const double> x,
                              std::span<const double> gamma) {
  HamiltonianResult r;
  r.control.resize(uvm_control_dim(spec.assets));
  r.value = hamiltonian(spec, x, gamma, r.control);
  return r;
}

void BsdeSolution::delta(std::size_t step, std::span<const double> x, std::span<double> out) const {
  const auto& s = steps_[step];
  for (std::size_t j = 0; j < assets_; ++j) out[j] = s.delta[j](x);
}

void BsdeSolution::gamma(std::size_t step, std::span<const double> x, std::span<double> out) const {
  const auto& s = steps_[step];
  const std::size_t d = assets_;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j; k < d; ++k) {
      const std::size_t c = gamma_index(j, k, d);
      double v = s.gamma[c](x);
      const double xx = x[j] * x[k];
      if (!s.gamma_window.empty() && xx > 0.0) {
        v = std::clamp(xx * v, s.gamma_window[c].lo, s.gamma_window[c].hi) / xx;
      }
      out[j * d + k] = out[k * d + j] = v;
    }
  }
}

namespace {

double quantile(std::vector<double> v, double q) {
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

}  // namespace

BsdeSolution backward_sweep(const UvmSpec& spec, const NoiseBatch& batch, const BasisSpec& basis,
                            const BsdeOptions& options) {
  spec.validate();
  const std::size_t d = spec.assets;
  if (batch.factors() != d) throw ConfigError("bsde: noise factor count must equal the asset count");
  if ((batch.correlation() - spec.reference_correlation()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError("bsde: noise batch must carry the reference correlation");
  }
  if (basis.dim() != d) throw ConfigError("bsde: basis dimension must equal the asset count");
  if (std::abs(batch.grid().horizon() - spec.horizon) > 1e-12) {
    throw ConfigError("bsde: grid horizon differs from the UVM horizon");
  }

  const ModelSpec model = spec.model();
  const auto& grid = batch.grid();
  const std::size_t n = grid.intervals();
  const std::size_t paths = batch.paths();
  const StatePaths states = evolve_reference(model, spec.sigma_hat, batch, options.exec);

  const Eigen::MatrixXd inv = spec.reference_correlation().inverse();
  const std::size_t gcount = d * (d + 1) / 2;
  const std::size_t responses = 1 + d + gcount;
  const auto& sh = spec.sigma_hat;

  std::vector<double> y(paths);
  for_each_index(options.exec, paths, [&](std::size_t p) {
    y[p] = model.terminal_payoff(states.at(p, n));
  });

  std::vector<BsdeStep> steps(n);
  std::vector<double> ys(paths * responses);
  std::vector<double> xs(paths * d);
  std::vector<double> ratio(paths);
  // g(X_T) plus the corrections along each path; its mean matches Y0 up to
  // the ridge, and its spread gives the Monte-Carlo error of Y0.
  std::vector<double> pathwise = y;
  double y0 = 0.0, y0_error = 0.0;

  for (std::size_t i = n; i >= 1; --i) {
    const double dt = grid.step(i - 1);
    for_each_index(options.exec, paths, [&](std::size_t p) {
      const auto dw = batch.dw(p, i - 1);
      const auto x = states.at(p, i - 1);
      double u[8];
      std::vector<double> u_heap;
      double* uu = u;
      if (d > 8) {
        u_heap.resize(d);
        uu = u_heap.data();
      }
      for (std::size_t j = 0; j < d; ++j) {
        double v = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          v += inv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * dw[k];
        }
        uu[j] = v / dt;
      }
      double* row = ys.data() + p * responses;
      row[0] = y[p];
      for (std::size_t j = 0; j < d; ++j) row[1 + j] = uu[j] / (sh[j] * x[j]);
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
          const double w = uu[j] * uu[k] -
                           inv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) / dt -
                           (j == k ? sh[j] * uu[j] : 0.0);
          row[1 + d + gamma_index(j, k, d)] = w / (sh[j] * sh[k] * x[j] * x[k]);
        }
      }
      std::copy(x.begin(), x.end(), xs.begin() + static_cast<std::ptrdiff_t>(p * d));
    });

    BsdeStep& step = steps[i - 1];
    std::vector<RegressedFn> fns;
    if (i - 1 == 0) {
      std::vector<double> col(paths);
      for (std::size_t p = 0; p < paths; ++p) col[p] = ys[p * responses];
      const double mean = compensated_sum(col) / static_cast<double>(paths);
      const double level = options.center_weights ? mean : 0.0;
      fns.push_back(RegressedFn::constant(d, mean, paths));
      for (std::size_t r = 1; r < responses; ++r) {
        for (std::size_t p = 0; p < paths; ++p) {
          col[p] = (ys[p * responses] - level) * ys[p * responses + r];
        }
        fns.push_back(RegressedFn::constant(d, compensated_sum(col) / static_cast<double>(paths), paths));
      }
    } else {
      // The weights have zero conditional mean, so Y may be replaced by
      // Y - E_{i-1}[Y] in the Z and Gamma responses.
      std::vector<double> col(paths);
      for (std::size_t p = 0; p < paths; ++p) col[p] = ys[p * responses];
      fns.push_back(fit(basis, xs, col, options.fit));
      for_each_index(options.exec, paths, [&](std::size_t p) {
        const double* xp = xs.data() + p * d;
        const double level = options.center_weights ? fns[0]({xp, d}) : 0.0;
        double* row = ys.data() + p * responses;
        for (std::size_t r = 1; r < responses; ++r) row[r] *= row[0] - level;
      });
      const std::vector<double> weighted = [&] {
        std::vector<double> w(paths * (responses - 1));
        for (std::size_t p = 0; p < paths; ++p) {
          std::copy(ys.begin() + static_cast<std::ptrdiff_t>(p * responses + 1),
                    ys.begin() + static_cast<std::ptrdiff_t>((p + 1) * responses),
                    w.begin() + static_cast<std::ptrdiff_t>(p * (responses - 1)));
        }
        return w;
      }();
      auto rest = fit_many(basis, xs, weighted, responses - 1, options.fit);
      fns.insert(fns.end(), rest.begin(), rest.end());
    }
    step.value = fns[0];
    step.delta.assign(fns.begin() + 1, fns.begin() + 1 + static_cast<std::ptrdiff_t>(d));
    step.gamma.assign(fns.begin() + 1 + static_cast<std::ptrdiff_t>(d), fns.end());

    if (options.clamp_quantile > 0.0) {
      step.gamma_window.resize(gcount);
      std::vector<double> vals(paths);
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
          const std::size_t c = gamma_index(j, k, d);
          for_each_index(options.exec, paths, [&](std::size_t p) {
            const auto x = states.at(p, i - 1);
            vals[p] = x[j] * x[k] * step.gamma[c](x);
          });
          step.gamma_window[c] = {quantile(vals, options.clamp_quantile),
                                  quantile(vals, 1.0 - options.clamp_quantile)};
        }
      }
    }

    for_each_index(options.exec, paths, [&](std::size_t p) {
      const auto x = states.at(p, i - 1);
      std::vector<double> g(d * d), control(uvm_control_dim(d));
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
          const std::size_t c = gamma_index(j, k, d);
          double v = step.gamma[c](x);
          const double xx = x[j] * x[k];
          if (!step.gamma_window.empty() && xx > 0.0) {
            v = std::clamp(xx * v, step.gamma_window[c].lo, step.gamma_window[c].hi) / xx;
          }
          g[j * d + k] = g[k * d + j] = v;
        }
      }
      const double h = hamiltonian(spec, x, g, control);
      // Linear term at the reference control, evaluated by the same routine
      // as H so a singleton box cancels exactly.
      std::vector<double> ref(uvm_control_dim(d), spec.rho_hat);
      std::copy(sh.begin(), sh.end(), ref.begin());
      const double lin = uvm_quadratic(ref, x, g, d);
      const double correction = h - lin;
      ratio[p] = std::abs(correction) / std::max(std::abs(h), std::numeric_limits<double>::min());
      y[p] = step.value(x) + correction * dt;
      pathwise[p] += correction * dt;
    });
    step.correction_ratio = *std::max_element(ratio.begin(), ratio.end());

    if (i - 1 == 0) {
      const auto s = sample_stats(y);
      y0 = s.mean;
      y0_error = sample_stats(pathwise).std_error;
    }
  }
  return BsdeSolution(d, grid, std::move(steps), y0, y0_error);
}

void BsdeSolution::write(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "bsde_solution 1\n";
  os << "assets " << assets_ << '\n';
  os << "horizon " << grid_.horizon() << '\n';
  os << "intervals " << grid_.intervals() << '\n';
  os << "y0 " << y0_ << '\n';
  os << "y0_error " << y0_error_ << '\n';
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const auto& s = steps_[i];
    os << "step " << i << '\n';
    os << "correction_ratio " << s.correction_ratio << '\n';
    os << "windows " << s.gamma_window.size() << '\n';
    for (const auto& w : s.gamma_window) os << w.lo << ' ' << w.hi << '\n';
    os << "component value\n";
    s.value.write(os);
    for (std::size_t j = 0; j < s.delta.size(); ++j) {
      os << "component delta " << j << '\n';
      s.delta[j].write(os);
    }
    for (std::size_t j = 0; j < assets_; ++j) {
      for (std::size_t k = j; k < assets_; ++k) {
        os << "component gamma " << j << ' ' << k << '\n';
        s.gamma[gamma_index(j, k, assets_)].write(os);
      }
    }
  }
  os.precision(old);
}

namespace {

void expect_word(std::istream& is, const std::string& key) {
  std::string word;
  if (!(is >> word) || word != key) {
    throw ConfigError("bsde solution record: expected '" + key + "', got '" + word + "'");
  }
}

}  // namespace

BsdeSolution BsdeSolution::read(std::istream& is) {
  expect_word(is, "bsde_solution");
  int version = 0;
  is >> version;
  if (version != 1) throw ConfigError("bsde solution record: bad version");
  std::size_t assets = 0, intervals = 0;
  double horizon = 0.0, y0 = 0.0, y0_error = 0.0;
  expect_word(is, "assets");
  is >> assets;
  expect_word(is, "horizon");
  is >> horizon;
  expect_word(is, "intervals");
  is >> intervals;
  expect_word(is, "y0");
  is >> y0;
  expect_word(is, "y0_error");
  is >> y0_error;
  std::vector<BsdeStep> steps(intervals);
  for (std::size_t i = 0; i < intervals; ++i) {
    auto& s = steps[i];
    std::size_t index = 0, windows = 0;
    expect_word(is, "step");
    is >> index;
    if (index != i) throw ConfigError("bsde solution record: steps out of order");
    expect_word(is, "correction_ratio");
    is >> s.correction_ratio;
    expect_word(is, "windows");
    is >> windows;
    s.gamma_window.resize(windows);
    for (auto& w : s.gamma_window) is >> w.lo >> w.hi;
    expect_word(is, "component");
    expect_word(is, "value");
    s.value = RegressedFn::read(is);
    for (std::size_t j = 0; j < assets; ++j) {
      std::size_t jj = 0;
      expect_word(is, "component");
      expect_word(is, "delta");
      is >> jj;
      s.delta.push_back(RegressedFn::read(is));
    }
    for (std::size_t j = 0; j < assets; ++j) {
      for (std::size_t k = j; k < assets; ++k) {
        std::size_t a = 0, b = 0;
        expect_word(is, "component");
        expect_word(is, "gamma");
        is >> a >> b;
        s.gamma.push_back(RegressedFn::read(is));
      }
    }
  }
  if (!is) throw ConfigError("bsde solution record: truncated");
  return BsdeSolution(assets, TimeGrid(horizon, intervals), std::move(steps), y0, y0_error);
}

}  // namespace ctrl_duality
