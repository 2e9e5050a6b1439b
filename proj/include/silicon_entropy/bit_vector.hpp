#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "silicon_entropy/errors.hpp"

namespace silicon_entropy {

/// Packed, length-tagged bit sequence.
///
/// Bit i lives in word i / 64 at position i % 64, so the little-endian byte
/// image puts bit i in byte i / 8 at position i % 8 (LSB first). Bits past
/// size() in the last word are always zero, which keeps equality, popcount
/// and hashing purely word-wise.
class BitVector {
 public:
  using word_type = std::uint64_t;
  static constexpr std::size_t kWordBits = 64;

  BitVector() = default;

  explicit BitVector(std::size_t size, bool value = false)
      : words_(word_count(size), value ? ~word_type{0} : word_type{0}), size_(size) {
    trim();
  }

  /// Takes ownership of packed words; extra words are dropped and the tail masked.
  static BitVector from_words(std::vector<word_type> words, std::size_t size) {
    if (words.size() < word_count(size)) {
      throw ArgumentError("BitVector::from_words: not enough words for the requested size");
    }
    BitVector out;
    words.resize(word_count(size));
    out.words_ = std::move(words);
    out.size_ = size;
    out.trim();
    return out;
  }

  // '0'/'1' characters; whitespace and '_' are ignored as separators.
  static BitVector from_string(std::string_view text) {
    BitVector out;
    for (char c : text) {
      if (c == '0' || c == '1') {
        out.push_back(c == '1');
      } else if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '_') {
        throw ArgumentError(std::string("BitVector::from_string: unexpected character '") + c +
                            "'");
      }
    }
    return out;
  }

  static BitVector from_bytes(std::span<const std::uint8_t> bytes, std::size_t size) {
    if (bytes.size() < (size + 7) / 8) {
      throw ArgumentError("BitVector::from_bytes: " + std::to_string(bytes.size()) +
                          " bytes cannot hold " + std::to_string(size) + " bits");
    }
    std::vector<word_type> words(word_count(size), 0);
    for (std::size_t k = 0; k < (size + 7) / 8; ++k) {
      words[k / 8] |= word_type{bytes[k]} << (8 * (k % 8));
    }
    return from_words(std::move(words), size);
  }

  static BitVector from_hex(std::string_view hex, std::size_t size) {
    if (hex.size() != 2 * ((size + 7) / 8)) {
      throw ArgumentError("BitVector::from_hex: expected " + std::to_string(2 * ((size + 7) / 8)) +
                          " hex digits for " + std::to_string(size) + " bits");
    }
    std::vector<std::uint8_t> bytes(hex.size() / 2);
    for (std::size_t k = 0; k < bytes.size(); ++k) {
      bytes[k] = static_cast<std::uint8_t>(hex_value(hex[2 * k]) << 4 | hex_value(hex[2 * k + 1]));
    }
    BitVector out = from_bytes(bytes, size);
    // Non-canonical input (stray tail bits) is rejected rather than silently masked.
    if (out.to_bytes() != bytes) throw ArgumentError("BitVector::from_hex: bits set past length");
    return out;
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  bool operator[](std::size_t i) const noexcept { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }

  bool test(std::size_t i) const {
    check_index(i);
    return (*this)[i];
  }

  void set(std::size_t i, bool value = true) {
    check_index(i);
    const word_type mask = word_type{1} << (i % kWordBits);
    if (value) {
      words_[i / kWordBits] |= mask;
    } else {
      words_[i / kWordBits] &= ~mask;
    }
  }

  void push_back(bool bit) {
    if (size_ % kWordBits == 0) words_.push_back(0);
    if (bit) words_.back() |= word_type{1} << (size_ % kWordBits);
    ++size_;
  }

  void append(const BitVector& other) {
    if (other.empty()) return;
    const std::size_t shift = size_ % kWordBits;
    const std::size_t new_size = size_ + other.size_;
    if (shift == 0) {
      words_.insert(words_.end(), other.words_.begin(), other.words_.end());
    } else {
      for (word_type w : other.words_) {
        words_.back() |= w << shift;
        words_.push_back(w >> (kWordBits - shift));
      }
    }
    size_ = new_size;
    words_.resize(word_count(size_));
    trim();
  }

  /// Keeps the first `size` bits (or zero-extends).
  void resize(std::size_t size) {
    words_.resize(word_count(size), 0);
    size_ = size;
    trim();
  }

  BitVector slice(std::size_t pos, std::size_t len) const {
    if (pos > size_ || len > size_ - pos) {
      throw ArgumentError("BitVector::slice: range [" + std::to_string(pos) + ", " +
                          std::to_string(pos + len) + ") exceeds length " + std::to_string(size_));
    }
    std::vector<word_type> out(word_count(len), 0);
    const std::size_t q = pos / kWordBits;
    const std::size_t r = pos % kWordBits;
    for (std::size_t j = 0; j < out.size(); ++j) {
      word_type w = words_[q + j] >> r;
      if (r != 0 && q + j + 1 < words_.size()) w |= words_[q + j + 1] << (kWordBits - r);
      out[j] = w;
    }
    return from_words(std::move(out), len);
  }

  std::size_t popcount() const noexcept {
    std::size_t total = 0;
    for (word_type w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }

  /// Ones in [begin, end).
  std::size_t popcount(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size_) throw ArgumentError("BitVector::popcount: bad range");
    if (begin == end) return 0;
    const std::size_t wb = begin / kWordBits;
    const std::size_t we = (end - 1) / kWordBits;
    const word_type head = ~word_type{0} << (begin % kWordBits);
    const word_type tail = (end % kWordBits) ? (word_type{1} << (end % kWordBits)) - 1 : ~word_type{0};
    if (wb == we) return static_cast<std::size_t>(std::popcount(words_[wb] & head & tail));
    std::size_t total = static_cast<std::size_t>(std::popcount(words_[wb] & head));
    for (std::size_t w = wb + 1; w < we; ++w) total += static_cast<std::size_t>(std::popcount(words_[w]));
    return total + static_cast<std::size_t>(std::popcount(words_[we] & tail));
  }

  BitVector& operator^=(const BitVector& other) {
    require_same_size(other, "^");
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] ^= other.words_[w];
    return *this;
  }

  BitVector& operator&=(const BitVector& other) {
    require_same_size(other, "&");
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= other.words_[w];
    return *this;
  }

  BitVector& operator|=(const BitVector& other) {
    require_same_size(other, "|");
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= other.words_[w];
    return *this;
  }

  BitVector operator~() const {
    BitVector out = *this;
    for (word_type& w : out.words_) w = ~w;
    out.trim();
    return out;
  }

  friend BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }
  friend BitVector operator&(BitVector a, const BitVector& b) { return a &= b; }
  friend BitVector operator|(BitVector a, const BitVector& b) { return a |= b; }

  friend bool operator==(const BitVector& a, const BitVector& b) noexcept {
    return a.size_ == b.size_ && a.words_ == b.words_;
  }

  std::span<const word_type> words() const noexcept { return words_; }

  std::string to_string() const {
    std::string out(size_, '0');
    for (std::size_t i = 0; i < size_; ++i) {
      if ((*this)[i]) out[i] = '1';
    }
    return out;
  }

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out((size_ + 7) / 8);
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = static_cast<std::uint8_t>(words_[k / 8] >> (8 * (k % 8)));
    }
    return out;
  }

  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (std::uint8_t b : to_bytes()) {
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 0xF]);
    }
    return out;
  }

 private:
  static constexpr std::size_t word_count(std::size_t bits) { return (bits + kWordBits - 1) / kWordBits; }

  static unsigned hex_value(char c) {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw ArgumentError(std::string("BitVector::from_hex: bad hex digit '") + c + "'");
  }

  void trim() noexcept {
    if (size_ % kWordBits != 0 && !words_.empty()) {
      words_.back() &= (word_type{1} << (size_ % kWordBits)) - 1;
    }
  }

  void check_index(std::size_t i) const {
    if (i >= size_) {
      throw ArgumentError("BitVector: index " + std::to_string(i) + " out of range for length " +
                          std::to_string(size_));
    }
  }

  void require_same_size(const BitVector& other, const char* op) const {
    if (other.size_ != size_) {
      throw ArgumentError(std::string("BitVector operator") + op + ": length mismatch (" +
                          std::to_string(size_) + " vs " + std::to_string(other.size_) + ")");
    }
  }

  std::vector<word_type> words_;
  std::size_t size_ = 0;
};

inline std::size_t hamming_distance(const BitVector& a, const BitVector& b) {
  if (a.size() != b.size()) {
    throw ArgumentError("hamming_distance: length mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  }
  std::size_t total = 0;
  auto wa = a.words();
  auto wb = b.words();
  for (std::size_t w = 0; w < wa.size(); ++w) total += static_cast<std::size_t>(std::popcount(wa[w] ^ wb[w]));
  return total;
}

inline double fractional_hamming_distance(const BitVector& a, const BitVector& b) {
  if (a.empty() && b.empty()) return 0.0;
  return static_cast<double>(hamming_distance(a, b)) / static_cast<double>(a.size());
}

inline double ones_fraction(const BitVector& bits) {
  return bits.empty() ? 0.0 : static_cast<double>(bits.popcount()) / static_cast<double>(bits.size());
}

// Interleave equal-length blocks cell-major: out[i * blocks + k] = block_k[i].
inline BitVector interleave(std::span<const BitVector> blocks) {
  if (blocks.empty()) return {};
  const std::size_t n = blocks.front().size();
  for (const auto& b : blocks) {
    if (b.size() != n) throw ArgumentError("interleave: blocks differ in length");
  }
  const std::size_t m = blocks.size();
  std::vector<std::uint64_t> words((n * m + 63) / 64, 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k, ++pos) {
      if (blocks[k][i]) words[pos / 64] |= std::uint64_t{1} << (pos % 64);
    }
  }
  return BitVector::from_words(std::move(words), n * m);
}

}  // namespace silicon_entropy
