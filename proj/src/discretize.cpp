#include "ctrl_duality/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ctrl_duality/errors.hpp"

namespace ctrl_duality {

TimeGrid::TimeGrid(double horizon, std::size_t intervals) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("time grid: horizon must be positive, got " + std::to_string(horizon));
  }
  if (intervals == 0) throw ConfigError("time grid: interval count must be at least 1");
  times_.resize(intervals + 1);
  const double n = static_cast<double>(intervals);
  for (std::size_t i = 0; i <= intervals; ++i) {
    times_[i] = horizon * (static_cast<double>(i) / n);
  }
  times_.back() = horizon;
  mesh_ = 0.0;
  for (std::size_t i = 0; i < intervals; ++i) mesh_ = std::max(mesh_, step(i));
}

std::size_t TimeGrid::interval_of(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0;
  const auto k = static_cast<std::size_t>(it - times_.begin()) - 1;
  return std::min(k, intervals() - 1);
}

TimeGrid make_time_grid(double horizon, std::size_t intervals) {
  return TimeGrid(horizon, intervals);
}

ControlBox::ControlBox(std::vector<Interval> coords, Predicate feasible)
    : coords_(std::move(coords)), feasible_(std::move(feasible)) {
  if (coords_.empty()) throw ConfigError("control box: needs at least one coordinate");
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    const auto& c = coords_[i];
    if (!std::isfinite(c.lo) || !std::isfinite(c.hi)) {
      throw ConfigError("control box: coordinate " + std::to_string(i) + " is unbounded");
    }
    if (c.lo > c.hi) {
      throw ConfigError("control box: coordinate " + std::to_string(i) + " has lo > hi");
    }
  }
}

bool ControlBox::contains(std::span<const double> a, double tol) const {
  if (a.size() != coords_.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!coords_[i].contains(a[i], tol)) return false;
  }
  return true;
}

void ControlBox::clamp(std::span<double> a) const {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], coords_[i].lo, coords_[i].hi);
}

ControlBox::Predicate correlation_feasibility(std::size_t assets, double tol) {
  if (assets < 2) return {};
  return [assets, tol](std::span<const double> a) {
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(assets, assets);
    std::size_t idx = assets;
    for (std::size_t j = 0; j < assets; ++j) {
      for (std::size_t k = j + 1; k < assets; ++k) {
        corr(j, k) = corr(k, j) = a[idx++];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() >= -tol;
  };
}

ControlNet make_control_net(const ControlBox& box, double spacing) {
  if (!(spacing > 0.0)) throw ConfigError("control net: spacing must be positive");
  std::vector<std::vector<double>> axes(box.dim());
  for (std::size_t j = 0; j < box.dim(); ++j) {
    const auto& c = box[j];
    if (c.width() == 0.0) {
      axes[j] = {c.lo};
      continue;
    }
    // Tolerance keeps e.g. 0.1 / 0.05 from rounding up to three cells.
    const auto cells = static_cast<std::size_t>(std::ceil(c.width() / spacing - 1e-9));
    const double step = c.width() / static_cast<double>(cells);
    axes[j].resize(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) axes[j][i] = c.lo + step * static_cast<double>(i);
    axes[j].back() = c.hi;
  }

  ControlNet net;
  net.spacing = spacing;
  std::size_t total = 1;
  for (const auto& axis : axes) total *= axis.size();
  std::vector<double> point(box.dim());
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t rest = n;
    for (std::size_t j = box.dim(); j-- > 0;) {
      point[j] = axes[j][rest % axes[j].size()];
      rest /= axes[j].size();
    }
    if (box.feasible(point)) net.points.push_back(point);
  }
  if (net.points.empty()) throw ConfigError("control net: no feasible point after filtering");
  return net;
}

ControlPath::ControlPath(std::size_t intervals, std::span<const double> constant)
    : dim_(constant.size()), values_(intervals * constant.size()) {
  for (std::size_t i = 0; i < intervals; ++i) std::copy(constant.begin(), constant.end(), at(i).begin());
}

std::size_t control_path_count(std::size_t net_size, std::size_t intervals) {
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  std::size_t count = 1;
  for (std::size_t i = 0; i < intervals; ++i) {
    if (net_size != 0 && count > kMax / net_size) return kMax;
    count *= net_size;
  }
  return count;
}

void for_each_control_path(const ControlNet& net, std::size_t intervals, std::size_t cap,
                           const std::function<void(const ControlPath&)>& visit) {
  const std::size_t count = control_path_count(net.size(), intervals);
  if (count > cap) {
    throw ConfigError("control path enumeration: " + std::to_string(net.size()) + "^" +
                      std::to_string(intervals) + " paths exceed the cap of " +
                      std::to_string(cap) + "; use optimizer (polytope) mode");
  }
  std::vector<std::size_t> digit(intervals, 0);
  ControlPath path(intervals, net.dim());
  for (std::size_t i = 0; i < intervals; ++i) {
    std::copy(net.points[0].begin(), net.points[0].end(), path.at(i).begin());
  }
  for (std::size_t n = 0; n < count; ++n) {
    visit(path);
    std::size_t i = intervals;
    while (i > 0) {
      --i;
      if (++digit[i] < net.size()) {
        std::copy(net.points[digit[i]].begin(), net.points[digit[i]].end(), path.at(i).begin());
        break;
      }
      digit[i] = 0;
      std::copy(net.points[0].begin(), net.points[0].end(), path.at(i).begin());
    }
  }
}

std::vector<ControlPath> enumerate_control_paths(const ControlNet& net, const TimeGrid& grid,
                                                 std::size_t cap) {
  std::vector<ControlPath> out;
  for_each_control_path(net, grid.intervals(), cap,
                        [&](const ControlPath& p) { out.push_back(p); });
  return out;
}

}  // namespace ctrl_duality
