// ctrl-duality: experiment driver for the regression / dual-bound estimators.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ctrl_duality/config.hpp"
#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/experiments.hpp"

namespace cd = ctrl_duality;

namespace {

struct Common {
  std::string config;
  std::string out;
  bool serial = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_out) {
  cmd->add_option("--config", c.config, "experiment file")->required()->check(CLI::ExistingFile);
  if (with_out) cmd->add_option("--out", c.out, "CSV output (overrides experiment.output)");
  cmd->add_flag("--serial", c.serial, "run the serial reference kernels");
}

cd::ExperimentConfig load(const Common& c, cd::ExperimentKind expected) {
  cd::ExperimentConfig cfg = cd::load_config(c.config);
  if (cfg.kind != expected) {
    throw cd::ConfigError(std::string("experiment.kind: '") + cd::to_string(cfg.kind) +
                          "' config given to the '" + cd::to_string(expected) + "' command");
  }
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

int finish(const cd::ExperimentConfig& cfg, const cd::Report& report) {
  std::cout << report.table;
  if (cfg.output) {
    std::ofstream os(*cfg.output);
    if (!os) throw cd::ConfigError("experiment.output: cannot write " + cfg.output->string());
    cd::write_csv(os, report.rows);
    std::cout << "wrote " << cfg.output->string() << '\n';
  }
  if (!report.sandwich_violations.empty()) {
    std::cerr << "error: lower bound exceeds the dual bound by more than 2 standard errors at "
              << report.sandwich_violations.size() << " step size(s)\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo lower and dual upper bounds for stochastic control problems"};
  app.name("ctrl-duality");
  app.require_subcommand(1);

  Common uvm_opts, cva_opts, am_opts, pde_opts;
  std::string phi;
  auto* uvm = app.add_subcommand("uvm", "uncertain volatility: BSDE, LS lower and dual upper bounds");
  add_common(uvm, uvm_opts, true);
  auto* cva = app.add_subcommand("cva", "CVA dual estimates by intensity and time step");
  add_common(cva, cva_opts, true);
  cva->add_option("--phi", phi, "martingale integrand")->check(CLI::IsMember({"disc-delta", "zero"}));
  auto* am = app.add_subcommand("american", "dual bound with optimal stopping");
  add_common(am, am_opts, false);
  auto* pde = app.add_subcommand("pde", "finite-difference reference values");
  add_common(pde, pde_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto exec = [](const Common& c) {
      return c.serial ? cd::Execution::serial : cd::Execution::parallel;
    };
    if (*uvm) {
      const auto cfg = load(uvm_opts, cd::ExperimentKind::uvm);
      return finish(cfg, cd::run_uvm(cfg, exec(uvm_opts)));
    }
    if (*cva) {
      auto cfg = load(cva_opts, cd::ExperimentKind::cva);
      if (phi == "zero") cfg.cva.spec.phi_preset = cd::PhiPreset::zero;
      if (phi == "disc-delta") cfg.cva.spec.phi_preset = cd::PhiPreset::discounted_delta;
      return finish(cfg, cd::run_cva(cfg, exec(cva_opts)));
    }
    if (*am) {
      const auto cfg = load(am_opts, cd::ExperimentKind::american);
      return finish(cfg, cd::run_american(cfg, exec(am_opts)));
    }
    if (*pde) {
      auto cfg = cd::load_config(pde_opts.config);
      cfg.output.reset();
      return finish(cfg, cd::run_pde(cfg));
    }
  } catch (const cd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cd::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
