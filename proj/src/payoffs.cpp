#include "ctrl_duality/payoffs.hpp"

#include <algorithm>

namespace ctrl_duality::payoffs {

Terminal call_spread(double k1, double k2) {
  return [k1, k2](std::span<const double> x) {
    return std::max(x[0] - k1, 0.0) - std::max(x[0] - k2, 0.0);
  };
}

Terminal call(double strike) {
  return [strike](std::span<const double> x) { return std::max(x[0] - strike, 0.0); };
}

Terminal put(double strike) {
  return [strike](std::span<const double> x) { return std::max(strike - x[0], 0.0); };
}

Terminal digital(double strike, double notional) {
  return [strike, notional](std::span<const double> x) { return x[0] >= strike ? notional : 0.0; };
}

Terminal linear() {
  return [](std::span<const double> x) { return x[0]; };
}

Terminal outperformer() {
  return [](std::span<const double> x) { return std::max(x[1] - x[0], 0.0); };
}

Terminal outperformer_spread(double lo, double hi) {
  return [lo, hi](std::span<const double> x) {
    return std::max(x[1] - lo * x[0], 0.0) - std::max(x[1] - hi * x[0], 0.0);
  };
}

Terminal constant(double value) {
  return [value](std::span<const double>) { return value; };
}

}  // namespace ctrl_duality::payoffs
