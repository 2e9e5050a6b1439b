#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "silicon_entropy/errors.hpp"

namespace silicon_entropy::randtest {

// Complementary error function. The C library's erfc is accurate to a few ulp
// over the whole real line.
inline double erfc(double x) { return std::erfc(x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace detail {

// x^a e^-x / Gamma(a), in log space.
inline double gamma_prefactor_log(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

// Lower regularized P(a, x) by its power series; converges fast for x < a + 1.
inline double igam_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 100000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(gamma_prefactor_log(a, x));
}

// Upper regularized Q(a, x) by the modified Lentz continued fraction; x >= a + 1.
inline double igamc_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(gamma_prefactor_log(a, x)) * h;
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
inline double igamc(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0) || std::isnan(a) || std::isnan(x)) {
    throw ArgumentError("igamc: need a > 0 and x >= 0");
  }
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::igam_series(a, x);
  return detail::igamc_fraction(a, x);
}

}  // namespace silicon_entropy::randtest
