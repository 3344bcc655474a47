#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace residual {

// One-pass mean/variance accumulator with the numerically stable update and
// an associative pairwise merge. Merging order is fixed by the caller so that
// results do not depend on how work was scheduled.
struct Welford {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }

  void merge(const Welford& other) {
    if (other.n == 0) return;
    if (n == 0) {
      *this = other;
      return;
    }
    const double delta = other.mean - mean;
    const auto total = static_cast<double>(n + other.n);
    mean += delta * (static_cast<double>(other.n) / total);
    m2 += other.m2 + delta * delta * (static_cast<double>(n) * static_cast<double>(other.n) / total);
    n += other.n;
  }

  double variance() const {  // unbiased sample variance
    if (n < 2) return 0.0;
    double v = m2 / static_cast<double>(n - 1);
    return v < 0.0 ? 0.0 : v;
  }

  double stddev() const { return std::sqrt(variance()); }
};

}  // namespace residual
