#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "silicon_entropy/dram_model.hpp"
#include "silicon_entropy/errors.hpp"

namespace silicon_entropy::dram {

namespace detail {

// Composite Simpson on [a, b] with an even number of intervals.
template <typename F>
double simpson(F&& f, double a, double b, std::size_t intervals) {
  if (intervals % 2 == 1) ++intervals;
  const double h = (b - a) / static_cast<double>(intervals);
  double sum = f(a) + f(b);
  for (std::size_t k = 1; k < intervals; ++k) sum += f(a + h * static_cast<double>(k)) * (k % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace detail

/// Expected fraction of cells whose startup value is unanimous over `reads`
/// power-ups, for a pattern-free array with bias ~ N(0, sigma_cap) and read
/// noise sigma_noise = noise_ratio * sigma_cap:
///
///   E_z[ Phi(z / r)^K + Phi(-z / r)^K ],  z ~ N(0, 1).
inline double expected_stable_fraction(double noise_ratio, std::size_t reads) {
  if (!(noise_ratio >= 0.0)) throw ArgumentError("expected_stable_fraction: noise ratio must be >= 0");
  if (reads < 1) throw ArgumentError("expected_stable_fraction: reads must be >= 1");
  if (noise_ratio == 0.0 || reads == 1) return 1.0;
  const double k = static_cast<double>(reads);
  // Integrand is even in z; Phi(-x) computed from erfc keeps the tail accurate.
  auto integrand = [&](double z) {
    const double upper = 0.5 * std::erfc(z / (noise_ratio * std::numbers::sqrt2));  // Phi(-z/r)
    const double stay_one = std::exp(k * std::log1p(-upper));
    const double stay_zero = upper > 0.0 ? std::exp(k * std::log(upper)) : 0.0;
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi) * (stay_one + stay_zero);
  };
  const double knee = std::min(9.0, 12.0 * noise_ratio);
  double total = detail::simpson(integrand, 0.0, knee, 4000);
  if (knee < 9.0) total += detail::simpson(integrand, knee, 9.0, 4000);
  return 2.0 * total;
}

struct NoiseCalibration {
  double target_fraction = 0.0;
  std::size_t reads = 0;
  double noise_ratio = 0.0;        // sigma_noise0 / sigma_cap
  double sigma_noise0 = 0.0;       // noise_ratio * sigma_cap
  double predicted_fraction = 0.0;
};

/// Bisection on sigma_noise0 / sigma_cap so that the expected unanimous
/// fraction over `reads` power-ups equals `target_fraction`. The fraction is
/// strictly decreasing in the ratio.
inline NoiseCalibration calibrate_noise(double target_fraction, std::size_t reads, double sigma_cap = kDefaultSigmaCap) {
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
    throw ArgumentError("calibrate_noise: target fraction must be in (0, 1)");
  }
  if (reads < 2) throw ArgumentError("calibrate_noise: need at least 2 reads");
  if (!(sigma_cap > 0.0)) throw ArgumentError("calibrate_noise: sigma_cap must be > 0");
  double lo = 1e-6;
  double hi = 10.0;
  if (expected_stable_fraction(hi, reads) > target_fraction) {
    throw ArgumentError("calibrate_noise: target fraction unreachable with this many reads");
  }
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (expected_stable_fraction(mid, reads) > target_fraction) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double ratio = 0.5 * (lo + hi);
  return {target_fraction, reads, ratio, ratio * sigma_cap, expected_stable_fraction(ratio, reads)};
}

}  // namespace silicon_entropy::dram
