#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "silicon_entropy/bit_vector.hpp"

namespace silicon_entropy {

// SplitMix64 finalizer. Used to derive independent sub-seeds, never as a stream.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t base, Parts... parts) noexcept {
  std::uint64_t h = mix64(base);
  ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(parts)))), ...);
  return h;
}

// 53-bit uniform in [0, 1).
constexpr double to_unit(std::uint64_t x) noexcept { return static_cast<double>(x >> 11) * 0x1.0p-53; }

/// Seeded sample source.
///
/// std::mt19937_64 is bit-exact across standard libraries; the library's
/// distribution objects are not, so uniform and normal variates are formed
/// here from the raw 64-bit outputs.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return to_unit(engine_()); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  bool bernoulli(double p) { return uniform() < p; }

  BitVector bits(std::size_t n) {
    std::vector<std::uint64_t> words((n + 63) / 64);
    for (auto& w : words) w = engine_();
    return BitVector::from_words(std::move(words), n);
  }

  // i.i.d. bits with P(1) = p.
  BitVector biased_bits(std::size_t n, double p) {
    std::vector<std::uint64_t> words((n + 63) / 64, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (uniform() < p) words[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    return BitVector::from_words(std::move(words), n);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Counter-based standard normal: a pure function of `key`.
inline double hashed_normal(std::uint64_t key) noexcept {
  const double u1 = 1.0 - to_unit(mix64(key ^ 0x5bd1e9955bd1e995ULL));
  const double u2 = to_unit(mix64(key + 0x2545f4914f6cdd1dULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace silicon_entropy
