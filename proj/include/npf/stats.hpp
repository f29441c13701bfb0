#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace npf {

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;  // standard error of the mean
};

// Sample mean and standard error, accumulated relative to the first sample
// so that an all-equal sample returns that value exactly with zero error.
inline Estimate sample_estimate(std::span<const double> values) {
  Estimate e;
  const std::size_t n = values.size();
  if (n == 0) return e;
  const double shift = values[0];
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : values) {
    const double d = v - shift;
    sum += d;
    sum_sq += d * d;
  }
  const double mean_shift = sum / static_cast<double>(n);
  e.mean = shift + mean_shift;
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - sum * mean_shift) / static_cast<double>(n - 1));
    e.std_error = std::sqrt(var / static_cast<double>(n));
  }
  return e;
}

}  // namespace npf
