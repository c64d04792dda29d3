#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctrl_duality/bsde.hpp"
#include "ctrl_duality/cva.hpp"
#include "ctrl_duality/dual.hpp"
#include "ctrl_duality/payoffs.hpp"
#include "ctrl_duality/pde.hpp"
#include "ctrl_duality/regress.hpp"

namespace ctrl_duality {

enum class ExperimentKind { uvm, cva, american, pde };

/// Textual payoff descriptor such as "call_spread 90 110".
struct PayoffDescriptor {
  std::string name = "call_spread";
  std::vector<double> params{90.0, 110.0};

  std::string str() const;
};

payoffs::Terminal make_payoff(const PayoffDescriptor& d);
PayoffDescriptor parse_payoff(const std::string& text);

struct BasisDescriptor {
  std::string family = "full";  ///< "full" or "quadratic2d"
  unsigned degree = 5;
  std::vector<double> scale;    ///< empty: X0
};

struct BsdeSettings {
  std::size_t paths = 1u << 15;
  BasisDescriptor basis;
  double ridge = 1e-8;
  double clamp_quantile = 0.001;
};

struct BoundSettings {
  std::size_t paths = 1u << 15;
  /// Number of steps of the lower-bound grid (1 / Delta_LS).
  std::size_t ls_steps = 400;
  SearchOptions search;
};

struct CvaSettings {
  CvaSpec spec;
  std::vector<double> intensities{0.01, 0.05, 0.1, 0.7};
  std::vector<std::size_t> steps{2, 4, 8, 12, 50, 100, 200};
  std::size_t paths = 8192;
  bool pde_column = true;
};

struct AmericanSettings {
  double strike = 100.0;
  double cap = 100.0;
  std::size_t steps = 4;
  std::size_t paths = 4096;
};

/// One experiment, loaded from an INI-style file:
///
///   [experiment] kind, id, seed_stage1, seed_stage2, output
///   [uvm]        assets, x0, sigma_lo, sigma_hi, sigma_hat, rho_lo, rho_hi,
///                rho_hat, horizon, payoff, steps
///   [bsde]       paths, basis, degree, scale, ridge, clamp_quantile
///   [bounds]     paths, ls_steps, method, net_spacing, enumerate_cap,
///                restarts, random_starts, block, max_evaluations
///   [cva]        intensities, steps, paths, sigma, horizon, x0, scale,
///                max_substep, phi, pde
///   [american]   strike, cap, steps, paths
///   [pde]        nodes, steps
///
/// Lists are whitespace or comma separated.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::uvm;
  std::string id = "experiment";
  std::uint64_t seed_stage1 = 1;
  std::uint64_t seed_stage2 = 2;
  std::optional<std::filesystem::path> output;

  UvmSpec uvm;
  PayoffDescriptor payoff;
  /// Intervals of the backward and dual grids, one run per entry.
  std::vector<std::size_t> steps{2, 4, 8, 12};
  BsdeSettings bsde;
  BoundSettings bounds;
  CvaSettings cva;
  AmericanSettings american;
  std::size_t pde_nodes = 400;
  std::size_t pde_steps = 400;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  BasisSpec basis() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& file);

const char* to_string(ExperimentKind kind);

}  // namespace ctrl_duality
