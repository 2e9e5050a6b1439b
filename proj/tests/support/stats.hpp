#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace stats {

// One-sample Kolmogorov-Smirnov distance to U(0, 1).
inline double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - p[i], p[i] - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic alpha = 0.01 critical value.
inline double ks_critical_001(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

// Binomial sigma of a proportion.
inline double binomial_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace stats
