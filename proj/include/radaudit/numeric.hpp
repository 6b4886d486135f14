#pragma once

#include <cstddef>
#include <span>

namespace radaudit {

// Pairwise (tree) summation. The reduction order depends only on the length,
// which keeps sums reproducible regardless of how values were produced.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double mean(std::span<const double> values) {
  return values.empty() ? 0.0
                        : pairwise_sum(values) / static_cast<double>(values.size());
}

}  // namespace radaudit
