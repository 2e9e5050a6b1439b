#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/dram_model.hpp"
#include "silicon_entropy/errors.hpp"

namespace silicon_entropy::dram {

using json = nlohmann::ordered_json;

inline json to_json(const ArrayGeometry& g) {
  return {{"rows", g.rows}, {"cols", g.cols}, {"word_width", g.word_width}};
}

inline json to_json(const ProcessParams& p) {
  return {{"sigma_cap", p.sigma_cap},
          {"sigma_noise0", p.sigma_noise0},
          {"leak_log_tau_mean", p.leak_log_tau_mean},
          {"leak_log_tau_sigma", p.leak_log_tau_sigma},
          {"sigma_age", p.sigma_age},
          {"pattern_strength", p.pattern_strength},
          {"pattern_period", p.pattern_period},
          {"pattern_phase", to_string(p.pattern_phase)}};
}

inline json to_json(const EnvCondition& e) {
  return {{"temperature", e.temperature}, {"supply_voltage", e.supply_voltage}, {"age_hours", e.age_hours}};
}

inline ArrayGeometry geometry_from_json(const json& j) {
  ArrayGeometry g{j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("word_width").get<std::size_t>()};
  g.validate();
  return g;
}

inline ProcessParams params_from_json(const json& j) {
  ProcessParams p;
  p.sigma_cap = j.at("sigma_cap").get<double>();
  p.sigma_noise0 = j.at("sigma_noise0").get<double>();
  p.leak_log_tau_mean = j.at("leak_log_tau_mean").get<double>();
  p.leak_log_tau_sigma = j.at("leak_log_tau_sigma").get<double>();
  p.sigma_age = j.value("sigma_age", kDefaultSigmaAge);
  p.pattern_strength = j.value("pattern_strength", 0.0);
  p.pattern_period = j.value("pattern_period", std::size_t{16});
  p.pattern_phase = parse_pattern_phase(j.value("pattern_phase", std::string("zeros_first")));
  p.validate();
  return p;
}

inline EnvCondition env_from_json(const json& j) {
  EnvCondition e{j.at("temperature").get<double>(), j.at("supply_voltage").get<double>(),
                 j.value("age_hours", 0.0)};
  e.validate();
  return e;
}

// Cell arrays are never stored; the descriptor carries what is needed to
// re-derive them (seed, geometry, params, injected patterns, aging steps).
inline json descriptor(const DramDevice& device) {
  json patterns = json::array();
  for (const auto& t : device.injected_patterns()) {
    patterns.push_back({{"period", t.period}, {"strength", t.strength}, {"phase", to_string(t.phase)}});
  }
  json aging = json::array();
  for (const auto& s : device.aging_history()) aging.push_back({{"hours", s.hours}, {"seed", s.seed}});
  return {{"seed", device.seed()},
          {"geometry", to_json(device.geometry())},
          {"params", to_json(device.params())},
          {"age_hours", device.age_hours()},
          {"injected_patterns", patterns},
          {"aging_history", aging}};
}

inline DramDevice device_from_descriptor(const json& j) {
  try {
    DramDevice device(j.at("seed").get<std::uint64_t>(), geometry_from_json(j.at("geometry")),
                      params_from_json(j.at("params")));
    for (const auto& t : j.value("injected_patterns", json::array())) {
      device.inject_pattern_bias(t.at("period").get<std::size_t>(), t.at("strength").get<double>(),
                                 parse_pattern_phase(t.at("phase").get<std::string>()));
    }
    for (const auto& s : j.value("aging_history", json::array())) {
      device.age(s.at("hours").get<double>(), s.at("seed").get<std::uint64_t>());
    }
    return device;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("device descriptor: ") + e.what());
  }
}

// Packed format: u64 little-endian bit count, then ceil(n/8) bytes, bit i at
// byte i/8, position i%8.
inline void write_packed(std::ostream& out, const BitVector& bits) {
  std::uint64_t n = bits.size();
  unsigned char header[8];
  for (int k = 0; k < 8; ++k) header[k] = static_cast<unsigned char>(n >> (8 * k));
  out.write(reinterpret_cast<const char*>(header), 8);
  const auto bytes = bits.to_bytes();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline BitVector parse_packed(const std::vector<std::uint8_t>& data) {
  if (data.size() < 8) throw ArgumentError("packed bitstream: missing 8-byte length header");
  std::uint64_t n = 0;
  for (int k = 0; k < 8; ++k) n |= std::uint64_t{data[k]} << (8 * k);
  if (n > (data.size() - 8) * 8 || (n + 7) / 8 != data.size() - 8) {
    throw ArgumentError("packed bitstream: header says " + std::to_string(n) + " bits but payload has " +
                        std::to_string(data.size() - 8) + " bytes");
  }
  return BitVector::from_bytes(std::span<const std::uint8_t>(data).subspan(8), static_cast<std::size_t>(n));
}

inline bool looks_like_ascii_bits(const std::vector<std::uint8_t>& data) {
  if (data.empty()) return false;
  bool any_digit = false;
  for (std::uint8_t c : data) {
    if (c == '0' || c == '1') {
      any_digit = true;
    } else if (c != ' ' && c != '\n' && c != '\r' && c != '\t') {
      return false;
    }
  }
  return any_digit;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Accepts packed files or ASCII '0'/'1' text, detected by content.
inline BitVector read_bitstream(const std::filesystem::path& path) {
  const auto data = read_file_bytes(path);
  try {
    if (looks_like_ascii_bits(data)) {
      return BitVector::from_string(std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
    }
    return parse_packed(data);
  } catch (const ArgumentError& e) {
    throw IoError(path.string(), e.what());
  }
}

inline void write_packed_file(const std::filesystem::path& path, const BitVector& bits) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  write_packed(out, bits);
  if (!out) throw IoError(path.string(), "write failed");
}

/// Binary PGM (P5, maxval 255): 0 -> 255 (white), 1 -> 0 (black), `row_bits`
/// pixels per row. A final partial row is padded with white.
inline void write_pgm(std::ostream& out, const BitVector& bits, std::size_t row_bits) {
  if (row_bits == 0) throw ArgumentError("write_pgm: row width must be >= 1");
  const std::size_t rows = bits.empty() ? 1 : (bits.size() + row_bits - 1) / row_bits;
  out << "P5\n" << row_bits << ' ' << rows << "\n255\n";
  std::vector<char> line(row_bits);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < row_bits; ++c) {
      const std::size_t i = r * row_bits + c;
      line[c] = static_cast<char>(i < bits.size() && bits[i] ? 0 : 255);
    }
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
}

inline void write_pgm_file(const std::filesystem::path& path, const BitVector& bits, std::size_t row_bits) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  write_pgm(out, bits, row_bits);
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace silicon_entropy::dram
