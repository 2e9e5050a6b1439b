#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/dram_io.hpp"
#include "silicon_entropy/dram_model.hpp"
#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/rng.hpp"

namespace silicon_entropy::puf {

using dram::ArrayGeometry;
using dram::DramDevice;
using dram::EnvCondition;
using json = nlohmann::ordered_json;

inline constexpr std::size_t kDefaultIdLength = 128;
inline constexpr std::size_t kDefaultEnrollmentReads = 144;
inline constexpr double kDefaultAuthThreshold = 0.2;

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct EnrollmentMask {
  std::vector<std::size_t> cell_indices;  // strictly increasing
  ArrayGeometry source_geometry;
  std::size_t readings_used = 0;
  std::vector<EnvCondition> conditions_used;

  std::size_t size() const noexcept { return cell_indices.size(); }
  bool empty() const noexcept { return cell_indices.empty(); }

  double fraction() const {
    return static_cast<double>(cell_indices.size()) / static_cast<double>(source_geometry.capacity());
  }

  std::uint64_t digest() const {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(8 * (cell_indices.size() + 3));
    auto put = [&](std::uint64_t v) {
      for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    };
    put(source_geometry.rows);
    put(source_geometry.cols);
    put(source_geometry.word_width);
    for (std::size_t i : cell_indices) put(i);
    return fnv1a(bytes);
  }

  void validate() const {
    for (std::size_t k = 0; k < cell_indices.size(); ++k) {
      if (cell_indices[k] >= source_geometry.capacity()) throw ArgumentError("enrollment mask: index out of range");
      if (k > 0 && cell_indices[k] <= cell_indices[k - 1]) {
        throw ArgumentError("enrollment mask: indices must be strictly increasing");
      }
    }
  }
};

struct Fingerprint {
  BitVector bits;
  std::string device_label;
  std::uint64_t mask_digest = 0;
};

struct AuthDecision {
  double fractional_hd = 0.0;
  double threshold = kDefaultAuthThreshold;
  bool accepted = false;
};

namespace detail {

inline void require_equal_lengths(std::span<const BitVector> readings, const char* op) {
  for (const auto& r : readings) {
    if (r.size() != readings.front().size()) {
      throw ArgumentError(std::string(op) + ": readings differ in length (" + std::to_string(readings.front().size()) +
                          " vs " + std::to_string(r.size()) + ")");
    }
  }
}

}  // namespace detail

// Cells whose startup value is identical across every reading.
inline BitVector unanimous_cells(std::span<const BitVector> readings) {
  if (readings.empty()) throw ArgumentError("unanimous_cells: no readings");
  detail::require_equal_lengths(readings, "unanimous_cells");
  BitVector all_ones = readings.front();
  BitVector any_one = readings.front();
  for (const auto& r : readings.subspan(1)) {
    all_ones &= r;
    any_one |= r;
  }
  return all_ones | ~any_one;
}

/// Selects stable cells: those whose majority value occurs in at least
/// `min_stability` of the readings. The default (nullopt) demands unanimity.
/// An empty mask is a legal result; callers decide what to do with it.
inline EnrollmentMask enroll(std::span<const BitVector> readings, std::optional<std::size_t> min_stability = std::nullopt,
                             std::optional<ArrayGeometry> geometry = std::nullopt) {
  if (readings.size() < 2) throw ArgumentError("enroll: need at least 2 readings");
  detail::require_equal_lengths(readings, "enroll");
  const std::size_t n = readings.front().size();
  const std::size_t k = min_stability.value_or(readings.size());
  if (k == 0 || k > readings.size()) {
    throw ArgumentError("enroll: min_stability must be in [1, " + std::to_string(readings.size()) + "]");
  }
  const ArrayGeometry geom = geometry.value_or(ArrayGeometry{1, 1, n});
  if (geom.capacity() != n) throw ArgumentError("enroll: geometry capacity does not match reading length");

  EnrollmentMask mask;
  mask.source_geometry = geom;
  mask.readings_used = readings.size();
  if (k == readings.size()) {
    const BitVector stable = unanimous_cells(readings);
    mask.cell_indices.reserve(stable.popcount());
    for (std::size_t i = 0; i < n; ++i) {
      if (stable[i]) mask.cell_indices.push_back(i);
    }
    return mask;
  }
  std::vector<std::uint32_t> ones(n, 0);
  for (const auto& r : readings) {
    for (std::size_t i = 0; i < n; ++i) ones[i] += r[i] ? 1U : 0U;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t majority = std::max<std::size_t>(ones[i], readings.size() - ones[i]);
    if (majority >= k) mask.cell_indices.push_back(i);
  }
  return mask;
}

// `count` power cycles; leaves the device powered off.
inline std::vector<BitVector> collect_startup_reads(DramDevice& device, const EnvCondition& env, std::size_t count,
                                                    std::uint64_t rng_seed) {
  if (device.powered()) device.power_off();
  std::vector<BitVector> reads;
  reads.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    reads.push_back(device.power_up_read(env, derive_seed(rng_seed, r)));
    device.power_off();
  }
  return reads;
}

/// Unanimity fraction over `count` power-ups without keeping the reads.
inline double measure_stable_fraction(DramDevice& device, const EnvCondition& env, std::size_t count,
                                      std::uint64_t rng_seed) {
  if (count < 2) throw ArgumentError("measure_stable_fraction: need at least 2 reads");
  if (device.powered()) device.power_off();
  BitVector all_ones;
  BitVector any_one;
  for (std::size_t r = 0; r < count; ++r) {
    BitVector bits = device.power_up_read(env, derive_seed(rng_seed, r));
    device.power_off();
    if (r == 0) {
      all_ones = bits;
      any_one = std::move(bits);
    } else {
      all_ones &= bits;
      any_one |= bits;
    }
  }
  return ones_fraction(all_ones | ~any_one);
}

/// Enrollment straight from a device. With several conditions the mask is the
/// intersection: a cell must be unanimous at every condition.
inline EnrollmentMask enroll_device(DramDevice& device, std::span<const EnvCondition> conditions, std::size_t reads,
                                    std::uint64_t rng_seed) {
  if (conditions.empty()) throw ArgumentError("enroll_device: no enrollment conditions");
  if (reads < 2) throw ArgumentError("enroll_device: need at least 2 reads per condition");
  BitVector stable(device.capacity(), true);
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    auto readings = collect_startup_reads(device, conditions[c], reads, derive_seed(rng_seed, c));
    stable &= unanimous_cells(readings);
  }
  EnrollmentMask mask;
  mask.source_geometry = device.geometry();
  mask.readings_used = reads * conditions.size();
  mask.conditions_used.assign(conditions.begin(), conditions.end());
  for (std::size_t i = 0; i < stable.size(); ++i) {
    if (stable[i]) mask.cell_indices.push_back(i);
  }
  return mask;
}

inline EnrollmentMask enroll_device(DramDevice& device, const EnvCondition& env, std::size_t reads,
                                    std::uint64_t rng_seed) {
  return enroll_device(device, std::span<const EnvCondition>(&env, 1), reads, rng_seed);
}

// Masked cells of one reading, in index order, truncated to id_length.
inline BitVector extract_masked(const BitVector& reading, const EnrollmentMask& mask, std::size_t id_length) {
  if (mask.size() < id_length) throw EnrollmentDeficit(id_length, mask.size());
  BitVector out(id_length);
  for (std::size_t k = 0; k < id_length; ++k) {
    if (reading[mask.cell_indices[k]]) out.set(k);
  }
  return out;
}

/// One power cycle: startup read, masked extraction, power off again.
inline Fingerprint generate_id(DramDevice& device, const EnrollmentMask& mask, const EnvCondition& env,
                               std::size_t id_length, std::uint64_t rng_seed, std::string device_label = {}) {
  if (id_length == 0) throw ArgumentError("generate_id: id_length must be >= 1");
  if (!(mask.source_geometry == device.geometry())) {
    throw ArgumentError("generate_id: mask geometry does not match the device");
  }
  if (mask.size() < id_length) throw EnrollmentDeficit(id_length, mask.size());
  if (device.powered()) device.power_off();
  const BitVector reading = device.power_up_read(env, rng_seed);
  device.power_off();
  if (device_label.empty()) device_label = "device-" + std::to_string(device.seed());
  return {extract_masked(reading, mask, id_length), std::move(device_label), mask.digest()};
}

inline AuthDecision authenticate(const Fingerprint& candidate, const Fingerprint& stored,
                                 double threshold = kDefaultAuthThreshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ArgumentError("authenticate: threshold must be in [0, 1]");
  if (candidate.bits.size() != stored.bits.size()) {
    throw ArgumentError("authenticate: fingerprint lengths differ (" + std::to_string(candidate.bits.size()) + " vs " +
                        std::to_string(stored.bits.size()) + ")");
  }
  if (candidate.bits.empty()) throw ArgumentError("authenticate: empty fingerprints");
  const double hd = fractional_hamming_distance(candidate.bits, stored.bits);
  return {hd, threshold, hd <= threshold};
}

// Mean pairwise fractional Hamming distance.
inline double mean_pairwise_hd(std::span<const BitVector> items, const char* op) {
  if (items.size() < 2) throw ArgumentError(std::string(op) + ": need at least 2 inputs");
  detail::require_equal_lengths(items, op);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < items.size(); ++a) {
    for (std::size_t b = a + 1; b < items.size(); ++b, ++pairs) total += fractional_hamming_distance(items[a], items[b]);
  }
  return total / static_cast<double>(pairs);
}

inline double intra_hd(std::span<const BitVector> readings) { return mean_pairwise_hd(readings, "intra_hd"); }

inline double inter_hd(std::span<const Fingerprint> fingerprints) {
  std::vector<BitVector> bits;
  bits.reserve(fingerprints.size());
  for (const auto& f : fingerprints) bits.push_back(f.bits);
  return mean_pairwise_hd(bits, "inter_hd");
}

// ---------------------------------------------------------------------------
// Stability reports

struct ScheduleEntry {
  EnvCondition env;
  std::size_t reads = kDefaultEnrollmentReads;
  std::string label;  // empty -> rendered from env
};

struct StabilityRow {
  std::string label;
  EnvCondition env;
  std::size_t reads = 0;
  double stable_fraction = 0.0;
};

inline std::string describe(const EnvCondition& env) {
  std::ostringstream s;
  s << "T=" << env.temperature << "C V=" << env.supply_voltage << "V age=" << env.age_hours << "h";
  return s.str();
}

/// Unanimity fraction per schedule entry. Entries whose env.age_hours is
/// ahead of the device age first age the device up to it (aging never runs
/// backwards, so earlier targets just read at the current age).
inline std::vector<StabilityRow> stability_report(DramDevice& device, std::span<const ScheduleEntry> schedule,
                                                  std::uint64_t rng_seed) {
  if (schedule.empty()) throw ArgumentError("stability_report: empty schedule");
  for (const auto& e : schedule) {
    if (e.reads < 2) throw ArgumentError("stability_report: every entry needs at least 2 reads");
    e.env.validate();
  }
  std::vector<StabilityRow> rows;
  rows.reserve(schedule.size());
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto& e = schedule[k];
    if (e.env.age_hours > device.age_hours()) {
      device.age(e.env.age_hours - device.age_hours(), derive_seed(rng_seed, 0xA9E, k));
    }
    const double fraction = measure_stable_fraction(device, e.env, e.reads, derive_seed(rng_seed, k));
    rows.push_back({e.label.empty() ? describe(e.env) : e.label, e.env, e.reads, fraction});
  }
  return rows;
}

struct AgingCampaign {
  double hours_per_month = 730.0;
  double burn_in_hours = 730.0;
  std::size_t reads = kDefaultEnrollmentReads;
  EnvCondition env = EnvCondition::nominal();
};

/// The nine-epoch measurement calendar: one un-aged reading, then aged
/// readings from Sep 2014 to Feb 2016.
inline std::vector<ScheduleEntry> table_schedule(const AgingCampaign& campaign = {}) {
  struct Epoch {
    const char* label;
    int month;
  };
  static constexpr Epoch kAged[] = {{"Sep 2014", 0}, {"Feb 2015", 5},  {"Mar 2015", 6},  {"Apr 2015", 7},
                                    {"Jul 2015", 10}, {"Aug 2015", 11}, {"Jan 2016", 16}, {"Feb 2016", 17}};
  std::vector<ScheduleEntry> schedule;
  EnvCondition env = campaign.env;
  env.age_hours = 0.0;
  schedule.push_back({env, campaign.reads, "pre-aging Sep 2014"});
  for (const auto& e : kAged) {
    env.age_hours = campaign.burn_in_hours + campaign.hours_per_month * e.month;
    schedule.push_back({env, campaign.reads, e.label});
  }
  return schedule;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string fnv_hex(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, v >>= 4) out[static_cast<std::size_t>(k)] = kDigits[v & 0xF];
  return out;
}

inline json to_json(const EnrollmentMask& mask) {
  json conditions = json::array();
  for (const auto& c : mask.conditions_used) conditions.push_back(dram::to_json(c));
  return {{"geometry", dram::to_json(mask.source_geometry)},
          {"readings_used", mask.readings_used},
          {"conditions_used", conditions},
          {"digest", fnv_hex(mask.digest())},
          {"cell_indices", mask.cell_indices}};
}

inline EnrollmentMask mask_from_json(const json& j) {
  try {
    EnrollmentMask mask;
    mask.source_geometry = dram::geometry_from_json(j.at("geometry"));
    mask.readings_used = j.at("readings_used").get<std::size_t>();
    for (const auto& c : j.value("conditions_used", json::array())) mask.conditions_used.push_back(dram::env_from_json(c));
    mask.cell_indices = j.at("cell_indices").get<std::vector<std::size_t>>();
    mask.validate();
    return mask;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("enrollment mask: ") + e.what());
  }
}

inline json to_json(const Fingerprint& f) {
  return {{"device_label", f.device_label},
          {"id_length", f.bits.size()},
          {"mask_digest", fnv_hex(f.mask_digest)},
          {"bits", f.bits.to_hex()}};
}

inline Fingerprint fingerprint_from_json(const json& j) {
  try {
    Fingerprint f;
    f.device_label = j.value("device_label", std::string());
    const auto length = j.at("id_length").get<std::size_t>();
    f.bits = BitVector::from_hex(j.at("bits").get<std::string>(), length);
    f.mask_digest = std::stoull(j.value("mask_digest", std::string("0")), nullptr, 16);
    return f;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("fingerprint: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ArgumentError(std::string("fingerprint: ") + e.what());
  }
}

inline json to_json(const AuthDecision& d) {
  return {{"fractional_hd", d.fractional_hd}, {"threshold", d.threshold}, {"accepted", d.accepted}};
}

inline void write_stability_csv(std::ostream& out, std::span<const StabilityRow> rows) {
  out << "condition,reads,stable_fraction\n";
  for (const auto& r : rows) out << r.label << ',' << r.reads << ',' << r.stable_fraction << '\n';
}

}  // namespace silicon_entropy::puf
