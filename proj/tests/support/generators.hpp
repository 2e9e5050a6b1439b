#pragma once

// Hand-rolled generators for property tests and the randomness-test corpus.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/dram_io.hpp"

namespace gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }

  std::string bits(std::size_t n, double p_one = 0.5) {
    std::string s(n, '0');
    for (auto& c : s) c = unit() < p_one ? '1' : '0';
    return s;
  }

  // Two-state chain that repeats the previous bit with probability `stick`.
  std::string sticky(std::size_t n, double stick) {
    std::string s(n, '0');
    char cur = unit() < 0.5 ? '1' : '0';
    for (auto& c : s) {
      if (unit() >= stick) cur = unit() < 0.5 ? '1' : '0';
      c = cur;
    }
    return s;
  }

 private:
  std::mt19937_64 engine_;
};

inline std::string periodic(std::size_t n, std::size_t period) {
  std::string s(n, '0');
  for (std::size_t i = 0; i < n; ++i) s[i] = (i / period) % 2 ? '1' : '0';
  return s;
}

inline std::string pi_prefix(std::size_t n) {
  static const silicon_entropy::BitVector pi = silicon_entropy::dram::read_bitstream(SILICON_ENTROPY_TEST_DATA "/pi_1e6.bin");
  return pi.slice(0, n).to_string();
}

/// Inputs between 256 and 10^4 bits: uniform, biased, correlated, periodic,
/// constant and digits of pi.
inline std::vector<std::string> randomness_corpus(std::uint64_t seed = 20240611) {
  Rng rng(seed);
  std::vector<std::string> corpus;
  for (int i = 0; i < 24; ++i) corpus.push_back(rng.bits(rng.between(256, 10000)));
  for (double p : {0.3, 0.45, 0.48, 0.52, 0.55, 0.7}) corpus.push_back(rng.bits(rng.between(256, 10000), p));
  for (double stick : {0.1, 0.3, 0.6}) corpus.push_back(rng.sticky(rng.between(256, 10000), stick));
  for (std::size_t period : {1, 2, 3, 16}) corpus.push_back(periodic(rng.between(256, 10000), period));
  corpus.push_back(std::string(1000, '0'));
  corpus.push_back(std::string(4096, '1'));
  for (std::size_t n : {256, 1000, 6271, 6272, 10000}) corpus.push_back(pi_prefix(n));
  return corpus;
}

}  // namespace gen
