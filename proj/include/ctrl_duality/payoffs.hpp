#pragma once

#include <functional>
#include <span>

namespace ctrl_duality::payoffs {

using Terminal = std::function<double(std::span<const double>)>;

/// (x - k1)^+ - (x - k2)^+ on the first asset.
Terminal call_spread(double k1, double k2);
Terminal call(double strike);
Terminal put(double strike);
/// notional * 1{x >= strike}.
Terminal digital(double strike, double notional);
/// x (first asset).
Terminal linear();
/// (x2 - x1)^+.
Terminal outperformer();
/// (x2 - lo x1)^+ - (x2 - hi x1)^+.
Terminal outperformer_spread(double lo, double hi);
Terminal constant(double value);

}  // namespace ctrl_duality::payoffs
