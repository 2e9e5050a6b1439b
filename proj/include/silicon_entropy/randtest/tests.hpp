#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/randtest/special_functions.hpp"

namespace silicon_entropy::randtest {

inline constexpr double kDefaultAlpha = 0.01;

struct PValueReport {
  std::string test_name;
  double p_value = 0.0;
  double statistic = 0.0;
  std::vector<std::pair<std::string, double>> params;
  bool pass = false;
};

struct TestOptions {
  double alpha = kDefaultAlpha;
  bool enforce_minimum = true;  // off only for hand-sized worked examples
};

namespace detail {

inline double clamp_p(double p) { return std::isnan(p) ? 0.0 : std::clamp(p, 0.0, 1.0); }

inline PValueReport make_report(std::string name, double p, double statistic,
                                std::vector<std::pair<std::string, double>> params, const TestOptions& opt) {
  p = clamp_p(p);
  return {std::move(name), p, statistic, std::move(params), p >= opt.alpha};
}

inline void require_length(const char* test, const BitVector& bits, std::size_t minimum, const TestOptions& opt) {
  const std::size_t floor = opt.enforce_minimum ? minimum : 1;
  if (bits.size() < floor) throw LengthError(test, floor, bits.size());
}

inline void check_alpha(const TestOptions& opt) {
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw ArgumentError("alpha must be in (0, 1)");
}

// Cyclic counts of every m-bit pattern (first bit most significant): window i
// covers bits i .. i+m-1 mod n.
inline std::vector<std::uint64_t> cyclic_pattern_counts(const BitVector& bits, unsigned m) {
  std::vector<std::uint64_t> counts(std::size_t{1} << m, 0);
  const std::size_t n = bits.size();
  if (m == 0) {
    counts[0] = n;
    return counts;
  }
  const std::uint64_t mask = (std::uint64_t{1} << m) - 1;
  std::uint64_t w = 0;
  for (unsigned j = 0; j + 1 < m; ++j) w = (w << 1) | (bits[j % n] ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    w = ((w << 1) | (bits[(i + m - 1) % n] ? 1 : 0)) & mask;
    ++counts[w];
  }
  return counts;
}

// Drops the last bit of every pattern; cyclic counts marginalize exactly.
inline std::vector<std::uint64_t> shorten(const std::vector<std::uint64_t>& counts) {
  std::vector<std::uint64_t> out(counts.size() / 2, 0);
  for (std::size_t v = 0; v < counts.size(); ++v) out[v >> 1] += counts[v];
  return out;
}

// n * psi^2_m = 2^m * sum(c^2) - n^2, exact in integers so that the serial
// differences never go negative through cancellation.
inline __int128 scaled_psi_squared(const std::vector<std::uint64_t>& counts, std::size_t n) {
  if (counts.size() == 1) return 0;
  __int128 sum = 0;
  for (auto c : counts) sum += static_cast<__int128>(c) * c;
  return static_cast<__int128>(counts.size()) * sum - static_cast<__int128>(n) * n;
}

inline double phi_entropy(const std::vector<std::uint64_t>& counts, std::size_t n) {
  double sum = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    sum += p * std::log(p);
  }
  return sum;
}

inline std::size_t longest_ones_run(const BitVector& bits, std::size_t begin, std::size_t end) {
  std::size_t best = 0;
  std::size_t cur = 0;
  for (std::size_t i = begin; i < end; ++i) {
    cur = bits[i] ? cur + 1 : 0;
    best = std::max(best, cur);
  }
  return best;
}

}  // namespace detail

// Frequency test. statistic = |S| / sqrt(n).
inline PValueReport monobit(const BitVector& bits, const TestOptions& opt = {}) {
  detail::check_alpha(opt);
  detail::require_length("monobit", bits, 100, opt);
  const double n = static_cast<double>(bits.size());
  const double s = 2.0 * static_cast<double>(bits.popcount()) - n;
  const double s_obs = std::abs(s) / std::sqrt(n);
  return detail::make_report("monobit", erfc(s_obs / std::numbers::sqrt2), s_obs, {{"n", n}}, opt);
}

// Frequency within blocks of M bits; trailing n mod M bits unused. statistic = chi^2.
inline PValueReport block_frequency(const BitVector& bits, std::size_t block_size = 128, const TestOptions& opt = {}) {
  detail::check_alpha(opt);
  if (block_size < 20) throw ArgumentError("block_frequency: block size M must be >= 20, got " + std::to_string(block_size));
  if (bits.size() < block_size) throw LengthError("block_frequency", block_size, bits.size());
  detail::require_length("block_frequency", bits, 100, opt);
  const std::size_t blocks = bits.size() / block_size;
  double sum = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const double pi = static_cast<double>(bits.popcount(b * block_size, (b + 1) * block_size)) / static_cast<double>(block_size);
    sum += (pi - 0.5) * (pi - 0.5);
  }
  const double chi2 = 4.0 * static_cast<double>(block_size) * sum;
  return detail::make_report("block_frequency", igamc(static_cast<double>(blocks) / 2.0, chi2 / 2.0), chi2,
                             {{"M", static_cast<double>(block_size)}, {"N", static_cast<double>(blocks)}}, opt);
}

// Runs test. statistic = V_n (total runs). A failed frequency prerequisite
// |pi - 1/2| >= 2/sqrt(n) gives p = 0.
inline PValueReport runs(const BitVector& bits, const TestOptions& opt = {}) {
  detail::check_alpha(opt);
  detail::require_length("runs", bits, 100, opt);
  const std::size_t n = bits.size();
  const double nd = static_cast<double>(n);
  const double pi = static_cast<double>(bits.popcount()) / nd;
  std::size_t changes = 0;
  if (n > 1) changes = (bits.slice(0, n - 1) ^ bits.slice(1, n - 1)).popcount();
  const double v = static_cast<double>(changes + 1);
  std::vector<std::pair<std::string, double>> params{{"n", nd}, {"pi", pi}};
  if (std::abs(pi - 0.5) >= 2.0 / std::sqrt(nd)) return detail::make_report("runs", 0.0, v, std::move(params), opt);
  const double q = pi * (1.0 - pi);
  const double p = erfc(std::abs(v - 2.0 * nd * q) / (2.0 * std::sqrt(2.0 * nd) * q));
  return detail::make_report("runs", p, v, std::move(params), opt);
}

/// Longest run of ones in M-bit blocks, M picked from n as tabulated:
/// 128 <= n < 6272 -> M = 8, n < 750000 -> M = 128, else M = 10^4.
/// statistic = chi^2 over the run-length classes.
inline PValueReport longest_run(const BitVector& bits, const TestOptions& opt = {}) {
  detail::check_alpha(opt);
  const std::size_t n = bits.size();
  if (n < 128) throw LengthError("longest_run", 128, n);
  std::size_t m = 0;
  std::size_t lo = 0;
  std::vector<double> probs;
  if (n < 6272) {
    m = 8;
    lo = 1;
    probs = {0.21484375, 0.3671875, 0.23046875, 0.1875};
  } else if (n < 750000) {
    m = 128;
    lo = 4;
    probs = {0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124};
  } else {
    m = 10000;
    lo = 10;
    probs = {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727};
  }
  const std::size_t k = probs.size() - 1;
  const std::size_t blocks = n / m;
  std::vector<double> nu(probs.size(), 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t run = detail::longest_ones_run(bits, b * m, (b + 1) * m);
    const std::size_t cls = run <= lo ? 0 : std::min(run - lo, k);
    nu[cls] += 1.0;
  }
  double chi2 = 0.0;
  const double nb = static_cast<double>(blocks);
  for (std::size_t i = 0; i < probs.size(); ++i) chi2 += (nu[i] - nb * probs[i]) * (nu[i] - nb * probs[i]) / (nb * probs[i]);
  return detail::make_report("longest_run", igamc(static_cast<double>(k) / 2.0, chi2 / 2.0), chi2,
                             {{"M", static_cast<double>(m)}, {"N", nb}, {"K", static_cast<double>(k)}}, opt);
}

enum class CusumMode { forward, backward };

// Cumulative sums. statistic = z = max |partial sum|.
inline PValueReport cusum(const BitVector& bits, CusumMode mode, const TestOptions& opt = {}) {
  detail::check_alpha(opt);
  const char* name = mode == CusumMode::forward ? "cusum_forward" : "cusum_backward";
  detail::require_length(name, bits, 100, opt);
  const std::size_t n = bits.size();
  long long s = 0;
  long long z = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = mode == CusumMode::forward ? j : n - 1 - j;
    s += bits[i] ? 1 : -1;
    z = std::max(z, s < 0 ? -s : s);
  }
  const long long nn = static_cast<long long>(n);
  const double root_n = std::sqrt(static_cast<double>(n));
  const double zd = static_cast<double>(z);
  double sum1 = 0.0;
  for (long long k = (-nn / z + 1) / 4; k <= (nn / z - 1) / 4; ++k) {
    sum1 += normal_cdf(static_cast<double>(4 * k + 1) * zd / root_n) - normal_cdf(static_cast<double>(4 * k - 1) * zd / root_n);
  }
  double sum2 = 0.0;
  for (long long k = (-nn / z - 3) / 4; k <= (nn / z - 1) / 4; ++k) {
    sum2 += normal_cdf(static_cast<double>(4 * k + 3) * zd / root_n) - normal_cdf(static_cast<double>(4 * k + 1) * zd / root_n);
  }
  return detail::make_report(name, 1.0 - sum1 + sum2, zd, {{"n", static_cast<double>(n)}}, opt);
}

/// Serial test on cyclic overlapping m-bit patterns. First report uses
/// del psi^2_m, second del^2 psi^2_m; statistic holds the respective delta.
inline std::pair<PValueReport, PValueReport> serial(const BitVector& bits, unsigned m = 2, const TestOptions& opt = {}) {
  detail::check_alpha(opt);
  if (m < 1 || m > 24) throw ArgumentError("serial: pattern length m must be in [1, 24], got " + std::to_string(m));
  const std::size_t n = bits.size();
  // m < floor(log2 n) - 2
  detail::require_length("serial", bits, std::size_t{1} << (m + 3), opt);
  const auto c_m = detail::cyclic_pattern_counts(bits, m);
  const auto c_m1 = detail::shorten(c_m);
  const __int128 psi_m = detail::scaled_psi_squared(c_m, n);
  const __int128 psi_m1 = detail::scaled_psi_squared(c_m1, n);
  const __int128 psi_m2 = m >= 2 ? detail::scaled_psi_squared(detail::shorten(c_m1), n) : 0;
  const double del1 = static_cast<double>(psi_m - psi_m1) / static_cast<double>(n);
  const double del2 = static_cast<double>(psi_m - 2 * psi_m1 + psi_m2) / static_cast<double>(n);
  const double md = static_cast<double>(m);
  std::vector<std::pair<std::string, double>> params{{"m", md}, {"n", static_cast<double>(n)}};
  return {detail::make_report("serial_1", igamc(std::pow(2.0, md - 2.0), del1 / 2.0), del1, params, opt),
          detail::make_report("serial_2", igamc(std::pow(2.0, md - 3.0), del2 / 2.0), del2, params, opt)};
}

// Approximate entropy. statistic = chi^2 = 2n (ln 2 - ApEn).
inline PValueReport approx_entropy(const BitVector& bits, unsigned m = 2, const TestOptions& opt = {}) {
  detail::check_alpha(opt);
  if (m > 23) throw ArgumentError("approx_entropy: block length m must be <= 23, got " + std::to_string(m));
  const std::size_t n = bits.size();
  // m < floor(log2 n) - 5
  detail::require_length("approx_entropy", bits, std::size_t{1} << (m + 6), opt);
  const auto c_next = detail::cyclic_pattern_counts(bits, m + 1);
  const double apen = detail::phi_entropy(detail::shorten(c_next), n) - detail::phi_entropy(c_next, n);
  const double chi2 = 2.0 * static_cast<double>(n) * (std::numbers::ln2 - apen);
  return detail::make_report("approx_entropy", igamc(std::pow(2.0, static_cast<double>(m) - 1.0), chi2 / 2.0), chi2,
                             {{"m", static_cast<double>(m)}, {"n", static_cast<double>(n)}, {"apen", apen}}, opt);
}

}  // namespace silicon_entropy::randtest
