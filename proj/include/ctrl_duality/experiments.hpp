#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctrl_duality/config.hpp"
#include "ctrl_duality/parallel.hpp"

namespace ctrl_duality {

/// One CSV row: experiment_id, estimator, delta_t, mean, stderr, n_paths,
/// seed, runtime_s.
struct ReportRow {
  std::string experiment_id;
  std::string estimator;
  double delta_t = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

struct Report {
  std::vector<ReportRow> rows;
  /// Human-readable table.
  std::string table;
  /// Rows (by delta_t) where lower - 2 stderr > dual + 2 stderr.
  std::vector<double> sandwich_violations;
};

void write_csv(std::ostream& os, const std::vector<ReportRow>& rows);

/// Regression, lower bound and dual bound for each step count in the config
/// (plus a BSB row when the model is one-dimensional).
Report run_uvm(const ExperimentConfig& config, Execution exec = Execution::parallel);

/// CVA dual estimates for every (intensity, step count), with the PDE column.
Report run_cva(const ExperimentConfig& config, Execution exec = Execution::parallel);

/// Dual bound for the capped put with stopping, phi = 0.
Report run_american(const ExperimentConfig& config, Execution exec = Execution::parallel);

/// Finite-difference reference values: BSB for uvm/pde configs, the CVA PDE
/// for cva configs.
Report run_pde(const ExperimentConfig& config);

}  // namespace ctrl_duality
