#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/rng.hpp"

namespace silicon_entropy::dram {

inline constexpr double kNominalTemperature = 25.0;  // degrees C
inline constexpr double kNominalSupply = 5.0;        // volts

// Latent bias participates in post-decay reads at full strength, so a fully
// decayed array reads exactly like a fresh power-up.
inline constexpr double kReadCoupling = 1.0;

// sigma_noise0 / sigma_cap = 0.0477 puts the expected fraction of cells that
// are unanimous over 144 power-ups at 0.90 (see calibration.hpp).
inline constexpr double kDefaultSigmaCap = 0.1;
inline constexpr double kDefaultSigmaNoise0 = 0.00477;
inline constexpr double kDefaultSigmaAge = 0.0003;  // per sqrt(hour)

struct CellAddress {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t bit = 0;

  friend bool operator==(const CellAddress&, const CellAddress&) = default;
};

/// rows x cols words of word_width bits. Linear index i = (row * cols + col) * word_width + bit.
struct ArrayGeometry {
  std::size_t rows = 64;
  std::size_t cols = 64;
  std::size_t word_width = 16;

  // 128 x 512 x 16 = 1 Mbit; 8192 bits per row.
  static constexpr ArrayGeometry one_megabit() { return {128, 512, 16}; }

  constexpr std::size_t capacity() const { return rows * cols * word_width; }
  constexpr std::size_t row_bits() const { return cols * word_width; }

  void validate() const {
    if (rows == 0 || cols == 0 || word_width == 0) {
      throw ArgumentError("array geometry needs nonzero rows, cols and word_width (got " +
                          std::to_string(rows) + "x" + std::to_string(cols) + "x" +
                          std::to_string(word_width) + ")");
    }
    const auto max = std::numeric_limits<std::size_t>::max();
    if (rows > max / cols || rows * cols > max / word_width) {
      throw ArgumentError("array geometry capacity overflows");
    }
  }

  CellAddress locate(std::size_t index) const {
    if (index >= capacity()) throw ArgumentError("cell index " + std::to_string(index) + " out of range");
    const std::size_t word = index / word_width;
    return {word / cols, word % cols, index % word_width};
  }

  std::size_t index(const CellAddress& a) const {
    if (a.row >= rows || a.col >= cols || a.bit >= word_width) {
      throw ArgumentError("cell address out of range");
    }
    return (a.row * cols + a.col) * word_width + a.bit;
  }

  friend bool operator==(const ArrayGeometry&, const ArrayGeometry&) = default;
};

enum class PatternPhase { zeros_first, ones_first };

inline std::string to_string(PatternPhase phase) {
  return phase == PatternPhase::zeros_first ? "zeros_first" : "ones_first";
}

inline PatternPhase parse_pattern_phase(const std::string& text) {
  if (text == "zeros_first") return PatternPhase::zeros_first;
  if (text == "ones_first") return PatternPhase::ones_first;
  throw ArgumentError("unknown pattern phase '" + text + "' (expected zeros_first or ones_first)");
}

// +1 / -1 sign of the architectural pattern at cell i.
constexpr double pattern_sign(std::size_t i, std::size_t period, PatternPhase phase) {
  const bool odd_band = (i / period) % 2 == 1;
  const bool positive = phase == PatternPhase::zeros_first ? odd_band : !odd_band;
  return positive ? 1.0 : -1.0;
}

struct ProcessParams {
  double sigma_cap = kDefaultSigmaCap;
  double sigma_noise0 = kDefaultSigmaNoise0;
  double leak_log_tau_mean = -2.995732273553991;  // ln(0.05 s): 50 ms median retention
  double leak_log_tau_sigma = 0.5;
  double sigma_age = kDefaultSigmaAge;
  double pattern_strength = 0.0;
  std::size_t pattern_period = 16;
  PatternPhase pattern_phase = PatternPhase::zeros_first;

  void validate() const {
    auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!finite_nonneg(sigma_cap) || !finite_nonneg(sigma_noise0) ||
        !finite_nonneg(leak_log_tau_sigma) || !finite_nonneg(sigma_age)) {
      throw ArgumentError("process params: sigmas must be finite and >= 0");
    }
    if (!std::isfinite(leak_log_tau_mean)) throw ArgumentError("process params: leak_log_tau_mean must be finite");
    if (!finite_nonneg(pattern_strength)) throw ArgumentError("process params: pattern_strength must be >= 0");
    if (pattern_period == 0) throw ArgumentError("process params: pattern_period must be >= 1");
  }

  friend bool operator==(const ProcessParams&, const ProcessParams&) = default;
};

struct EnvCondition {
  double temperature = kNominalTemperature;
  double supply_voltage = kNominalSupply;
  double age_hours = 0.0;  // target device age when used in a stability schedule

  static constexpr EnvCondition nominal() { return {}; }

  void validate() const {
    if (!std::isfinite(temperature)) throw ArgumentError("env: temperature must be finite");
    if (!(supply_voltage > 0.0) || !std::isfinite(supply_voltage)) {
      throw ArgumentError("env: supply_voltage must be > 0");
    }
    if (!(age_hours >= 0.0) || !std::isfinite(age_hours)) throw ArgumentError("env: age_hours must be >= 0");
  }

  friend bool operator==(const EnvCondition&, const EnvCondition&) = default;
};

// Read-noise multiplier: 1 + 0.5 |dT| / 25 + 0.5 |dV| / V_nom.
inline double noise_scale(const EnvCondition& env) {
  return 1.0 + 0.5 * std::abs(env.temperature - kNominalTemperature) / 25.0 +
         0.5 * std::abs(env.supply_voltage - kNominalSupply) / kNominalSupply;
}

// Retention-time multiplier: tau halves for every +20 C.
inline double leak_scale(const EnvCondition& env) {
  return std::exp2(-(env.temperature - kNominalTemperature) / 20.0);
}

struct PatternTerm {
  std::size_t period = 16;
  double strength = 0.0;
  PatternPhase phase = PatternPhase::zeros_first;

  friend bool operator==(const PatternTerm&, const PatternTerm&) = default;
};

struct AgingStep {
  double hours = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const AgingStep&, const AgingStep&) = default;
};

/// Behavioral model of one DRAM array.
///
/// Each cell carries a latent sense bias b (process variation plus any
/// architectural pattern), an aging drift d, a retention constant tau and a
/// normalized stored voltage v in [0, 1] with 0.5 the VDD/2 bias point. A
/// sensed bit is 1 iff (v - 0.5) + kappa (b + d) + N(0, sigma(env)) > 0.
///
/// Startup values exist only across the off -> on transition: power_up_read
/// needs a powered-off device and leaves it powered with every cell latched
/// to the value it read.
class DramDevice {
 public:
  DramDevice(std::uint64_t seed, const ArrayGeometry& geometry, const ProcessParams& params)
      : seed_(seed), geometry_(geometry), params_(params) {
    geometry_.validate();
    params_.validate();
    const std::size_t n = geometry_.capacity();
    latent_bias_.resize(n);
    leak_tau_.resize(n);
    aging_drift_.assign(n, 0.0);
    cell_state_.assign(n, 0.5);

    RandomStream bias_stream(derive_seed(seed_, kTagBias));
    for (double& b : latent_bias_) b = params_.sigma_cap * bias_stream.normal();
    if (params_.pattern_strength > 0.0) {
      add_pattern({params_.pattern_period, params_.pattern_strength, params_.pattern_phase});
    }
    RandomStream tau_stream(derive_seed(seed_, kTagTau));
    for (double& t : leak_tau_) t = std::exp(params_.leak_log_tau_mean + params_.leak_log_tau_sigma * tau_stream.normal());
  }

  std::uint64_t seed() const noexcept { return seed_; }
  const ArrayGeometry& geometry() const noexcept { return geometry_; }
  const ProcessParams& params() const noexcept { return params_; }
  std::size_t capacity() const noexcept { return latent_bias_.size(); }
  bool powered() const noexcept { return powered_; }
  double age_hours() const noexcept { return age_hours_; }

  std::span<const double> latent_bias() const noexcept { return latent_bias_; }
  std::span<const double> leak_tau() const noexcept { return leak_tau_; }
  std::span<const double> aging_drift() const noexcept { return aging_drift_; }
  std::span<const double> cell_state() const noexcept { return cell_state_; }

  const std::vector<PatternTerm>& injected_patterns() const noexcept { return injected_; }
  const std::vector<AgingStep>& aging_history() const noexcept { return aging_history_; }

  double sigma_noise(const EnvCondition& env) const { return params_.sigma_noise0 * noise_scale(env); }

  BitVector power_up_read(const EnvCondition& env, std::uint64_t rng_seed) {
    if (powered_) {
      throw ProtocolError("power_up_read: device is already powered; startup values exist only at power-up");
    }
    env.validate();
    BitVector bits = at_bias_point_ ? sense_at_bias_point(env, rng_seed) : sense(env, rng_seed, kTagStartup);
    powered_ = true;
    at_bias_point_ = false;
    for (std::size_t i = 0; i < cell_state_.size(); ++i) cell_state_[i] = bits[i] ? 1.0 : 0.0;
    return bits;
  }

  // Power cycle with complete discharge: every cell returns to the bias point.
  void power_off() {
    require_powered("power_off");
    std::fill(cell_state_.begin(), cell_state_.end(), 0.5);
    powered_ = false;
    at_bias_point_ = true;
  }

  // Powers off (if on) and lets every cell leak toward the bias point for
  // delay_ms. Calling it on a powered-off device extends the off period.
  void power_off_delay(double delay_ms, const EnvCondition& env) {
    if (!(delay_ms >= 0.0)) throw ArgumentError("power_off_delay: delay must be >= 0 ms");
    env.validate();
    const double delay_s = delay_ms * 1e-3;
    const double tau_scale = leak_scale(env);
    bool all_at_bias = true;
    for (std::size_t i = 0; i < cell_state_.size(); ++i) {
      const double decay = std::exp(-delay_s / (leak_tau_[i] * tau_scale));
      cell_state_[i] = 0.5 + (cell_state_[i] - 0.5) * decay;
      all_at_bias = all_at_bias && cell_state_[i] == 0.5;
    }
    powered_ = false;
    at_bias_point_ = all_at_bias;
  }

  void write_all(bool value) {
    require_powered("write_all");
    std::fill(cell_state_.begin(), cell_state_.end(), value ? 1.0 : 0.0);
  }

  // Refreshing read: cell_state is left untouched.
  BitVector read(const EnvCondition& env, std::uint64_t rng_seed) const {
    require_powered("read");
    env.validate();
    return sense(env, rng_seed, kTagRead);
  }

  void age(double hours, std::uint64_t aging_seed) {
    if (!(hours >= 0.0) || !std::isfinite(hours)) throw ArgumentError("age: hours must be >= 0");
    age_hours_ += hours;
    aging_history_.push_back({hours, aging_seed});
    if (hours == 0.0 || params_.sigma_age == 0.0) return;
    const double step = params_.sigma_age * std::sqrt(hours);
    RandomStream rs(derive_seed(seed_, kTagAging, aging_seed));
    for (double& d : aging_drift_) d += step * rs.normal();
    startup_cache_.clear();
  }

  void inject_pattern_bias(std::size_t period, double strength,
                           PatternPhase phase = PatternPhase::zeros_first) {
    if (period == 0) throw ArgumentError("inject_pattern_bias: period must be >= 1");
    if (!std::isfinite(strength)) throw ArgumentError("inject_pattern_bias: strength must be finite");
    if (strength == 0.0) return;
    PatternTerm term{period, strength, phase};
    add_pattern(term);
    injected_.push_back(term);
  }

 private:
  static constexpr std::uint64_t kTagBias = 0xB1A5;
  static constexpr std::uint64_t kTagTau = 0x7A0;
  static constexpr std::uint64_t kTagStartup = 0x5747;
  static constexpr std::uint64_t kTagRead = 0x4EAD;
  static constexpr std::uint64_t kTagAging = 0xA6E;

  void add_pattern(const PatternTerm& term) {
    for (std::size_t i = 0; i < latent_bias_.size(); ++i) {
      latent_bias_[i] += term.strength * pattern_sign(i, term.period, term.phase);
    }
    startup_cache_.clear();
  }

  void require_powered(const char* op) const {
    if (!powered_) throw ProtocolError(std::string(op) + ": device is powered off");
  }

  double margin(std::size_t i) const {
    return (cell_state_[i] - 0.5) + kReadCoupling * (latent_bias_[i] + aging_drift_[i]);
  }

  // P(bit = 1) = Phi(margin / sigma); a uniform draw below it reads a one.
  BitVector sense(const EnvCondition& env, std::uint64_t rng_seed, std::uint64_t tag) const {
    const std::size_t n = cell_state_.size();
    const double sigma = sigma_noise(env);
    std::vector<std::uint64_t> words((n + 63) / 64, 0);
    if (sigma == 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        if (margin(i) > 0.0) words[i / 64] |= std::uint64_t{1} << (i % 64);
      }
    } else {
      RandomStream rs(derive_seed(seed_, tag, rng_seed));
      const double scale = -1.0 / (sigma * std::numbers::sqrt2);
      for (std::size_t i = 0; i < n; ++i) {
        const double p_one = 0.5 * std::erfc(margin(i) * scale);
        if (rs.uniform() < p_one) words[i / 64] |= std::uint64_t{1} << (i % 64);
      }
    }
    return BitVector::from_words(std::move(words), n);
  }

  // Same model as sense() with v = 0.5 everywhere; per-cell probabilities are
  // cached because repeated power cycles at one condition dominate enrollment.
  BitVector sense_at_bias_point(const EnvCondition& env, std::uint64_t rng_seed) {
    const std::size_t n = cell_state_.size();
    const double sigma = sigma_noise(env);
    if (sigma == 0.0) return sense(env, rng_seed, kTagStartup);
    if (startup_cache_.size() != n || startup_cache_sigma_ != sigma) {
      startup_cache_.resize(n);
      const double scale = -1.0 / (sigma * std::numbers::sqrt2);
      for (std::size_t i = 0; i < n; ++i) startup_cache_[i] = 0.5 * std::erfc(margin(i) * scale);
      startup_cache_sigma_ = sigma;
    }
    RandomStream rs(derive_seed(seed_, kTagStartup, rng_seed));
    std::vector<std::uint64_t> words((n + 63) / 64, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (rs.uniform() < startup_cache_[i]) words[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    return BitVector::from_words(std::move(words), n);
  }

  std::uint64_t seed_;
  ArrayGeometry geometry_;
  ProcessParams params_;
  std::vector<double> latent_bias_;
  std::vector<double> leak_tau_;
  std::vector<double> aging_drift_;
  std::vector<double> cell_state_;
  bool powered_ = false;
  bool at_bias_point_ = true;
  double age_hours_ = 0.0;
  std::vector<PatternTerm> injected_;
  std::vector<AgingStep> aging_history_;
  std::vector<double> startup_cache_;
  double startup_cache_sigma_ = -1.0;
};

inline DramDevice new_device(std::uint64_t seed, const ArrayGeometry& geometry, const ProcessParams& params) {
  return DramDevice(seed, geometry, params);
}

}  // namespace silicon_entropy::dram
