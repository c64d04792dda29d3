#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ctrl_duality {

/// Uniform partition of [0, T].
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double horizon, std::size_t intervals);

  std::span<const double> times() const { return times_; }
  double time(std::size_t i) const { return times_[i]; }
  double step(std::size_t i) const { return times_[i + 1] - times_[i]; }
  std::size_t intervals() const { return times_.empty() ? 0 : times_.size() - 1; }
  double horizon() const { return times_.back(); }
  double mesh() const { return mesh_; }

  /// Index k of the interval [t_k, t_{k+1}) containing t; the last interval is
  /// closed on the right.
  std::size_t interval_of(double t) const;

 private:
  std::vector<double> times_;
  double mesh_ = 0.0;
};

TimeGrid make_time_grid(double horizon, std::size_t intervals);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double v, double tol = 1e-12) const { return v >= lo - tol && v <= hi + tol; }
};

/// Closed box of control values, optionally restricted by a feasibility
/// predicate (e.g. positive semi-definite induced correlation matrix).
class ControlBox {
 public:
  using Predicate = std::function<bool(std::span<const double>)>;

  ControlBox() = default;
  explicit ControlBox(std::vector<Interval> coords, Predicate feasible = {});

  std::size_t dim() const { return coords_.size(); }
  const Interval& operator[](std::size_t i) const { return coords_[i]; }
  std::span<const Interval> coords() const { return coords_; }

  bool contains(std::span<const double> a, double tol = 1e-12) const;
  bool feasible(std::span<const double> a) const { return !feasible_ || feasible_(a); }
  /// Clamps each coordinate into its interval.
  void clamp(std::span<double> a) const;

 private:
  std::vector<Interval> coords_;
  Predicate feasible_;
};

/// Predicate for UVM controls laid out as (sigma_1..sigma_d, rho_12, rho_13,
/// .., rho_{d-1,d}): the correlation matrix must have smallest eigenvalue
/// >= -tol.
ControlBox::Predicate correlation_feasibility(std::size_t assets, double tol = 1e-12);

/// Finite h-net of a control box.
struct ControlNet {
  std::vector<std::vector<double>> points;
  double spacing = 0.0;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

ControlNet make_control_net(const ControlBox& box, double spacing);

/// Piecewise-constant control: one value (of box dimension) per grid interval.
class ControlPath {
 public:
  ControlPath() = default;
  ControlPath(std::size_t intervals, std::size_t dim, double fill = 0.0)
      : dim_(dim), values_(intervals * dim, fill) {}
  ControlPath(std::size_t intervals, std::span<const double> constant);

  std::size_t intervals() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> at(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<double> at(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> flat() const { return values_; }
  std::span<double> flat() { return values_; }

  bool operator==(const ControlPath&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// Number of net-valued control paths |net|^intervals, saturating at
/// SIZE_MAX.
std::size_t control_path_count(std::size_t net_size, std::size_t intervals);

/// All of D_h in lexicographic order (interval 0 is the most significant
/// digit). Throws ConfigError when the count exceeds `cap`.
std::vector<ControlPath> enumerate_control_paths(const ControlNet& net, const TimeGrid& grid,
                                                 std::size_t cap);

/// Visits D_h in the same order without materializing it.
void for_each_control_path(const ControlNet& net, std::size_t intervals, std::size_t cap,
                           const std::function<void(const ControlPath&)>& visit);

}  // namespace ctrl_duality
