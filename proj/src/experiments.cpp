#include "ctrl_duality/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "ctrl_duality/bsde.hpp"
#include "ctrl_duality/cva.hpp"
#include "ctrl_duality/dual.hpp"
#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/payoffs.hpp"
#include "ctrl_duality/pde.hpp"
#include "ctrl_duality/rng.hpp"

namespace ctrl_duality {

namespace {

constexpr std::uint64_t kDualTag = 0x6475616cULL;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ReportRow row(const std::string& id, const std::string& estimator, double dt, const Estimate& e) {
  return {id, estimator, dt, e.mean, e.std_error, e.paths, e.seed, e.seconds};
}

std::string cell(double mean, double se) { return fmt::format("{:.3f}({:.3f})", mean, se); }

Grid1D bsb_grid(const ExperimentConfig& c) {
  Grid1D g = default_bsb_grid(c.uvm);
  g.nodes = c.pde_nodes;
  g.steps = c.pde_steps;
  return g;
}

Grid1D cva_grid(const ExperimentConfig& c, const CvaSpec& spec) {
  Grid1D g = default_cva_grid(spec);
  g.nodes = c.pde_nodes;
  g.steps = c.pde_steps;
  return g;
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << "experiment_id,estimator,delta_t,mean,stderr,n_paths,seed,runtime_s\n";
  for (const auto& r : rows) {
    os << fmt::format("{},{},{:.10g},{:.10g},{:.10g},{},{},{:.3f}\n", r.experiment_id, r.estimator,
                      r.delta_t, r.mean, r.std_error, r.paths, r.seed, r.seconds);
  }
}

Report run_uvm(const ExperimentConfig& config, Execution exec) {
  config.validate();
  if (config.kind != ExperimentKind::uvm) throw ConfigError("experiment.kind: run_uvm needs kind = uvm");
  const UvmSpec& spec = config.uvm;
  const ModelSpec model = spec.model();
  const BasisSpec basis = config.basis();
  const Eigen::MatrixXd corr = spec.reference_correlation();
  const std::size_t d = spec.assets;

  BsdeOptions bsde_opts;
  bsde_opts.fit.ridge = config.bsde.ridge;
  bsde_opts.clamp_quantile = config.bsde.clamp_quantile;
  bsde_opts.exec = exec;

  SearchOptions search = config.bounds.search;
  search.seed = config.seed_stage2;

  const TimeGrid ls_grid(spec.horizon, config.bounds.ls_steps);
  const NoiseBatch ls_batch =
      sample_noise(ls_grid, d, corr, config.bounds.paths, config.seed_stage2, exec);

  Report report;
  std::string& t = report.table;
  t += fmt::format("{}: {} assets, payoff {}, N1={} N2={}, Delta_LS=1/{}\n", config.id, d,
                   config.payoff.str(), config.bsde.paths, config.bounds.paths,
                   config.bounds.ls_steps);
  t += fmt::format("{:>8} {:>16} {:>16} {:>16} {:>6} {:>6} {:>9}\n", "Delta", "BSDE", "LS", "dual",
                   "beat", "caps", "seconds");

  for (std::size_t n : config.steps) {
    const TimeGrid grid(spec.horizon, n);
    const double dt = spec.horizon / static_cast<double>(n);

    const auto start = std::chrono::steady_clock::now();
    const NoiseBatch ref = sample_noise(grid, d, corr, config.bsde.paths, config.seed_stage1, exec);
    const BsdeSolution sol = backward_sweep(spec, ref, basis, bsde_opts);
    Estimate bsde;
    bsde.mean = sol.y0();
    bsde.std_error = sol.y0_error();
    bsde.paths = config.bsde.paths;
    bsde.seed = config.seed_stage1;
    bsde.seconds = seconds_since(start);

    const FeedbackRule feedback = uvm_feedback(spec, sol);
    const Estimate lower = lower_bound(model, feedback, ls_batch, exec);

    const NoiseBatch dual_batch = sample_noise(grid, d, corr, config.bounds.paths,
                                               mix_seed(config.seed_stage2, kDualTag + n), exec);
    const Estimate upper = dual_upper_bound(model, uvm_phi(sol), dual_batch, search, &feedback, exec);

    report.rows.push_back(row(config.id, "bsde", dt, bsde));
    report.rows.push_back(row(config.id, "ls", dt, lower));
    report.rows.push_back(row(config.id, "dual", dt, upper));

    const bool violated = lower.mean - 2.0 * lower.std_error > upper.mean + 2.0 * upper.std_error;
    if (violated) report.sandwich_violations.push_back(dt);
    t += fmt::format("{:>8} {:>16} {:>16} {:>16} {:>6.2f} {:>6} {:>9.1f}{}\n", fmt::format("1/{}", n),
                     cell(bsde.mean, bsde.std_error), cell(lower.mean, lower.std_error),
                     cell(upper.mean, upper.std_error), upper.optimizer.beat_fraction,
                     upper.optimizer.cap_hits, bsde.seconds + lower.seconds + upper.seconds,
                     violated ? "  SANDWICH VIOLATED" : "");
  }

  if (d == 1) {
    const auto start = std::chrono::steady_clock::now();
    const PdeResult pde = solve_bsb_1d(spec, bsb_grid(config));
    ReportRow r{config.id, "pde", spec.horizon / static_cast<double>(config.pde_steps), pde.value,
                0.0, 0, 0, seconds_since(start)};
    report.rows.push_back(r);
    t += fmt::format("{:>8} {:>16.4f}   ({}x{} grid{})\n", "PDE", pde.value, pde.grid.nodes,
                     pde.grid.steps, pde.converged ? "" : ", policy iteration hit the sweep cap");
  }
  return report;
}

Report run_cva(const ExperimentConfig& config, Execution exec) {
  config.validate();
  if (config.kind != ExperimentKind::cva) throw ConfigError("experiment.kind: run_cva needs kind = cva");
  const auto& cv = config.cva;

  Report report;
  std::string& t = report.table;
  t += fmt::format("{}: phi = {}, N = {}\n", config.id,
                   cv.spec.phi_preset == PhiPreset::zero ? "0" : "exp(-c(T-t))", cv.paths);
  t += fmt::format("{:>6}", "c");
  if (cv.pde_column) t += fmt::format(" {:>9}", "PDE");
  for (std::size_t n : cv.steps) t += fmt::format(" {:>15}", fmt::format("1/{}", n));
  t += '\n';

  for (double c : cv.intensities) {
    CvaSpec spec = cv.spec;
    spec.intensity = c;
    const std::string id = fmt::format("{}:c={}", config.id, c);
    t += fmt::format("{:>6}", c);
    if (cv.pde_column) {
      const auto start = std::chrono::steady_clock::now();
      const PdeResult pde = solve_cva_pde(spec, cva_grid(config, spec));
      report.rows.push_back({id, "pde", spec.horizon / static_cast<double>(config.pde_steps),
                             pde.value, 0.0, 0, 0, seconds_since(start)});
      t += fmt::format(" {:>9.4f}", pde.value);
    }
    for (std::size_t n : cv.steps) {
      const TimeGrid grid(spec.horizon, n);
      const Estimate e = cva_dual(spec, grid, cv.paths, config.seed_stage1, exec);
      report.rows.push_back(row(id, "dual", spec.horizon / static_cast<double>(n), e));
      t += fmt::format(" {:>15}", cell(e.mean, e.std_error));
    }
    t += '\n';
  }
  return report;
}

Report run_american(const ExperimentConfig& config, Execution exec) {
  config.validate();
  if (config.kind != ExperimentKind::american) {
    throw ConfigError("experiment.kind: run_american needs kind = american");
  }
  const UvmSpec& spec = config.uvm;
  const auto& am = config.american;
  ModelSpec model = spec.model();
  model.payoff.kind = PayoffKind::american;
  model.payoff.terminal = payoffs::put(am.strike);
  model.cap = am.cap;

  const std::size_t d = spec.assets;
  const PhiFn zero_phi = [](std::size_t, double, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  SearchOptions search = config.bounds.search;
  search.seed = config.seed_stage2;

  const TimeGrid grid(spec.horizon, am.steps);
  const NoiseBatch batch =
      sample_noise(grid, d, spec.reference_correlation(), am.paths, config.seed_stage2, exec);
  const Estimate e = american_dual(model, zero_phi, batch, search, exec);
  const double exercise_now = model.terminal_payoff(spec.x0);

  Report report;
  const double dt = spec.horizon / static_cast<double>(am.steps);
  report.rows.push_back(row(config.id, "american_dual", dt, e));
  report.table = fmt::format(
      "{}: capped put K={} cap={}, phi = 0, {} steps, N = {}\n"
      "  dual bound {}   exercise value g(X0) = {:.4f}   {:.1f} s\n",
      config.id, am.strike, am.cap, am.steps, am.paths, cell(e.mean, e.std_error), exercise_now,
      e.seconds);
  return report;
}

Report run_pde(const ExperimentConfig& config) {
  config.validate();
  Report report;
  if (config.kind == ExperimentKind::cva) {
    for (double c : config.cva.intensities) {
      CvaSpec spec = config.cva.spec;
      spec.intensity = c;
      const auto start = std::chrono::steady_clock::now();
      const PdeResult r = solve_cva_pde(spec, cva_grid(config, spec));
      const double secs = seconds_since(start);
      report.rows.push_back({fmt::format("{}:c={}", config.id, c), "pde",
                             spec.horizon / static_cast<double>(r.grid.steps), r.value, 0.0, 0, 0,
                             secs});
      report.table += fmt::format(
          "cva c={}: value {:.6f}  grid {} nodes x {} steps on [{:.4f}, {:.4f}]  {} steps  {:.2f} s\n",
          c, r.value, r.grid.nodes, r.grid.steps, r.grid.lo, r.grid.hi, r.iterations, secs);
    }
    return report;
  }
  if (config.uvm.assets != 1) throw ConfigError("uvm.assets: the BSB solver is one-dimensional");
  const auto start = std::chrono::steady_clock::now();
  const PdeResult r = solve_bsb_1d(config.uvm, bsb_grid(config));
  const double secs = seconds_since(start);
  report.rows.push_back({config.id, "pde", config.uvm.horizon / static_cast<double>(r.grid.steps),
                         r.value, 0.0, 0, 0, secs});
  report.table = fmt::format(
      "bsb {}: value {:.6f}  grid {} nodes x {} steps on log-range [{:.4f}, {:.4f}]  "
      "{} policy sweeps{}  {:.2f} s\n",
      config.payoff.str(), r.value, r.grid.nodes, r.grid.steps, r.grid.lo, r.grid.hi, r.iterations,
      r.converged ? "" : " (sweep cap hit, last iterate returned)", secs);
  return report;
}

}  // namespace ctrl_duality
