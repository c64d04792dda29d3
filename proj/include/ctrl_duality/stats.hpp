#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace ctrl_duality {

/// Neumaier-compensated sum in index order.
inline double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Mean and standard error of the mean; the reduction order is fixed, so the
/// result does not depend on how the samples were produced.
inline SampleStats sample_stats(std::span<const double> values) {
  SampleStats s;
  s.count = values.size();
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = compensated_sum(values) / n;
  if (values.size() < 2) return s;
  double acc = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double d = (v - s.mean) * (v - s.mean);
    const double y = d - comp;
    const double t = acc + y;
    comp = (t - acc) - y;
    acc = t;
  }
  s.std_error = std::sqrt(acc / (n - 1.0) / n);
  return s;
}

}  // namespace ctrl_duality
