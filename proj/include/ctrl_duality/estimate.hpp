#pragma once

#include <cstddef>
#include <cstdint>

namespace ctrl_duality {

struct OptimizerStats {
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;
  /// Paths whose search ended at the iteration cap.
  std::size_t cap_hits = 0;
  /// Fraction of paths where the search strictly improved on the reference
  /// control path.
  double beat_fraction = 0.0;
};

/// Monte-Carlo estimate.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  OptimizerStats optimizer;
};

}  // namespace ctrl_duality
