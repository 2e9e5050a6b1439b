#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "silicon_entropy/dram_model.hpp"
#include "silicon_entropy/dvft.hpp"
#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/puf.hpp"
#include "silicon_entropy/randtest/suite.hpp"
#include "silicon_entropy/trng.hpp"

namespace silicon_entropy::cli {

enum class ExperimentKind { puf_enroll, puf_auth, trng_remanence, trng_startup, trng_dvft, nist, aging_campaign };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::puf_enroll: return "puf-enroll";
    case ExperimentKind::puf_auth: return "puf-auth";
    case ExperimentKind::trng_remanence: return "trng-remanence";
    case ExperimentKind::trng_startup: return "trng-startup";
    case ExperimentKind::trng_dvft: return "trng-dvft";
    case ExperimentKind::nist: return "nist";
    case ExperimentKind::aging_campaign: return "aging-campaign";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::puf_enroll, ExperimentKind::puf_auth, ExperimentKind::trng_remanence,
                 ExperimentKind::trng_startup, ExperimentKind::trng_dvft, ExperimentKind::nist,
                 ExperimentKind::aging_campaign}) {
    if (to_string(k) == s) return k;
  }
  throw ArgumentError("unknown experiment kind '" + s + "'");
}

/// Everything a run needs. Defaults form a valid configuration on their own.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  dram::ArrayGeometry geometry = dram::ArrayGeometry::one_megabit();
  dram::ProcessParams params;
  dram::EnvCondition env;
  std::vector<dram::EnvCondition> schedule;  // enrollment conditions; empty -> {env}
  ExperimentKind kind = ExperimentKind::trng_remanence;

  std::size_t puf_reads = puf::kDefaultEnrollmentReads;
  std::size_t puf_id_length = puf::kDefaultIdLength;
  double puf_threshold = puf::kDefaultAuthThreshold;
  std::size_t puf_devices = 1;

  std::size_t trng_bits = 1'000'000;
  std::optional<double> trng_delay_ms;  // nullopt -> knee search
  std::size_t trng_rounds = 3;
  trng::ExtractionMode trng_mode = trng::ExtractionMode::xor_consecutive;
  trng::BitLayout trng_layout = trng::BitLayout::cell_major;
  bool trng_write_value = true;
  std::string trng_debias = "von_neumann";
  std::size_t trng_trials = 2;
  std::size_t trng_starvation_budget = 64;
  std::size_t trng_knee_rounds = 4;

  dvft::SupplyProfile dvft_profile = dvft::builtin_profile("bench");
  double dvft_init_offset = 0.10;  // fraction of mean_v
  dvft::DvftParams dvft_params;
  std::size_t dvft_warmup_bits = 300000;  // acquisition prefix dropped from the output
  std::size_t dvft_trace_stride = 100;

  randtest::SuiteConfig nist;

  puf::AgingCampaign aging;

  double calibration_target = 0.90;
  std::size_t calibration_reads = puf::kDefaultEnrollmentReads;

  std::string output_dir = "out";
  bool output_bitmap = false;
  std::size_t output_bitmap_width = 8192;

  std::vector<dram::EnvCondition> enrollment_conditions() const { return schedule.empty() ? std::vector{env} : schedule; }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline double parse_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ArgumentError("expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ArgumentError("expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ArgumentError("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ArgumentError("expected true/false, got '" + v + "'");
}

// "T:V[:age_hours]" entries separated by commas.
inline std::vector<dram::EnvCondition> parse_schedule(const std::string& v) {
  std::vector<dram::EnvCondition> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream p(item);
    std::string part;
    while (std::getline(p, part, ':')) parts.push_back(trim(part));
    if (parts.size() < 2 || parts.size() > 3) throw ArgumentError("schedule entry '" + item + "' is not T:V[:age_hours]");
    dram::EnvCondition e{parse_double(parts[0]), parse_double(parts[1]), parts.size() == 3 ? parse_double(parts[2]) : 0.0};
    e.validate();
    out.push_back(e);
  }
  if (out.empty()) throw ArgumentError("empty schedule");
  return out;
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string description;
  std::function<void(ExperimentConfig&, const std::string&)> apply;
};

/// The full set of accepted `section.key` names.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::vector<ConfigKey> keys{
      {"device.seed", "device and experiment seed", [](C& c, S v) { c.seed = parse_uint(v); }},
      {"device.rows", "array rows", [](C& c, S v) { c.geometry.rows = parse_uint(v); }},
      {"device.cols", "words per row", [](C& c, S v) { c.geometry.cols = parse_uint(v); }},
      {"device.word_width", "bits per word", [](C& c, S v) { c.geometry.word_width = parse_uint(v); }},
      {"device.sigma_cap", "latent bias spread (normalized volts)", [](C& c, S v) { c.params.sigma_cap = parse_double(v); }},
      {"device.sigma_noise0", "read noise at nominal conditions", [](C& c, S v) { c.params.sigma_noise0 = parse_double(v); }},
      {"device.leak_log_tau_mean", "mean of ln(retention seconds)", [](C& c, S v) { c.params.leak_log_tau_mean = parse_double(v); }},
      {"device.leak_log_tau_sigma", "spread of ln(retention seconds)", [](C& c, S v) { c.params.leak_log_tau_sigma = parse_double(v); }},
      {"device.sigma_age", "aging random-walk step per sqrt(hour)", [](C& c, S v) { c.params.sigma_age = parse_double(v); }},
      {"device.pattern_strength", "architectural pattern bias amplitude", [](C& c, S v) { c.params.pattern_strength = parse_double(v); }},
      {"device.pattern_period", "pattern band width in cells", [](C& c, S v) { c.params.pattern_period = parse_uint(v); }},
      {"device.pattern_phase", "zeros_first or ones_first", [](C& c, S v) { c.params.pattern_phase = dram::parse_pattern_phase(v); }},
      {"env.temperature", "degrees C", [](C& c, S v) { c.env.temperature = parse_double(v); }},
      {"env.supply_voltage", "volts", [](C& c, S v) { c.env.supply_voltage = parse_double(v); }},
      {"env.age_hours", "target device age", [](C& c, S v) { c.env.age_hours = parse_double(v); }},
      {"env.schedule", "enrollment conditions, T:V[:age_hours] comma-separated", [](C& c, S v) { c.schedule = parse_schedule(v); }},
      {"experiment.kind", "puf-enroll|puf-auth|trng-remanence|trng-startup|trng-dvft|nist|aging-campaign",
       [](C& c, S v) { c.kind = parse_kind(v); }},
      {"puf.reads", "startup reads per enrollment condition", [](C& c, S v) { c.puf_reads = parse_uint(v); }},
      {"puf.id_length", "fingerprint length in bits", [](C& c, S v) { c.puf_id_length = parse_uint(v); }},
      {"puf.threshold", "authentication HD threshold in [0, 1]", [](C& c, S v) { c.puf_threshold = parse_double(v); }},
      {"puf.devices", "devices to enroll (seeds seed .. seed+N-1)", [](C& c, S v) { c.puf_devices = parse_uint(v); }},
      {"trng.bits", "output bits", [](C& c, S v) { c.trng_bits = parse_uint(v); }},
      {"trng.delay_ms", "remanence delay, or 'auto' for the knee search",
       [](C& c, S v) {
         if (v == "auto") {
           c.trng_delay_ms.reset();
         } else {
           c.trng_delay_ms = parse_double(v);
         }
       }},
      {"trng.rounds", "remanence rounds per block", [](C& c, S v) { c.trng_rounds = parse_uint(v); }},
      {"trng.mode", "raw-read|flip-mask|xor-consecutive", [](C& c, S v) { c.trng_mode = trng::parse_extraction_mode(v); }},
      {"trng.layout", "round-major|cell-major", [](C& c, S v) { c.trng_layout = trng::parse_layout(v); }},
      {"trng.write_value", "value written before each remanence delay (0 or 1)", [](C& c, S v) { c.trng_write_value = parse_bool(v); }},
      {"trng.debias", "comma list of von_neumann, xor_fold:K; 'none' for raw", [](C& c, S v) { c.trng_debias = v; }},
      {"trng.trials", "power cycles per startup block", [](C& c, S v) { c.trng_trials = parse_uint(v); }},
      {"trng.starvation_budget", "source blocks without output before giving up", [](C& c, S v) { c.trng_starvation_budget = parse_uint(v); }},
      {"trng.knee_rounds", "reads per delay in the knee search", [](C& c, S v) { c.trng_knee_rounds = parse_uint(v); }},
      {"dvft.profile", "bench|usb|computer|dc", [](C& c, S v) { c.dvft_profile = dvft::builtin_profile(v); }},
      {"dvft.mean_v", "supply mean (overrides the profile)", [](C& c, S v) { c.dvft_profile.mean_v = parse_double(v); }},
      {"dvft.noise_sigma_v", "supply noise sigma (overrides the profile)", [](C& c, S v) { c.dvft_profile.noise_sigma_v = parse_double(v); }},
      {"dvft.drift_v_per_s", "supply drift (overrides the profile)", [](C& c, S v) { c.dvft_profile.drift_v_per_s = parse_double(v); }},
      {"dvft.init_offset", "initial v_ref offset as a fraction of mean_v", [](C& c, S v) { c.dvft_init_offset = parse_double(v); }},
      {"dvft.gain", "volts per unit cap deviation (0 = open loop)", [](C& c, S v) { c.dvft_params.gain = parse_double(v); }},
      {"dvft.charge_step", "integrator step per bit", [](C& c, S v) { c.dvft_params.charge_step = parse_double(v); }},
      {"dvft.leak", "integrator leak per step", [](C& c, S v) { c.dvft_params.leak = parse_double(v); }},
      {"dvft.dt_s", "sampling period in seconds", [](C& c, S v) { c.dvft_params.dt_s = parse_double(v); }},
      {"dvft.warmup_bits", "leading bits generated but not emitted while v_ref acquires", [](C& c, S v) { c.dvft_warmup_bits = parse_uint(v); }},
      {"dvft.trace_stride", "trace every Nth step (0 = no trace)", [](C& c, S v) { c.dvft_trace_stride = parse_uint(v); }},
      {"nist.alpha", "significance level", [](C& c, S v) { c.nist.alpha = parse_double(v); }},
      {"nist.block_size", "block frequency M", [](C& c, S v) { c.nist.block_size = parse_uint(v); }},
      {"nist.serial_m", "serial pattern length", [](C& c, S v) { c.nist.serial_m = static_cast<unsigned>(parse_uint(v)); }},
      {"nist.apen_m", "approximate entropy block length", [](C& c, S v) { c.nist.apen_m = static_cast<unsigned>(parse_uint(v)); }},
      {"aging.hours_per_month", "aging hours per calendar month", [](C& c, S v) { c.aging.hours_per_month = parse_double(v); }},
      {"aging.burn_in_hours", "aging applied before the first aged epoch", [](C& c, S v) { c.aging.burn_in_hours = parse_double(v); }},
      {"aging.reads", "startup reads per epoch", [](C& c, S v) { c.aging.reads = parse_uint(v); }},
      {"calibration.target", "target stable fraction", [](C& c, S v) { c.calibration_target = parse_double(v); }},
      {"calibration.reads", "reads the target refers to", [](C& c, S v) { c.calibration_reads = parse_uint(v); }},
      {"output.dir", "output directory", [](C& c, S v) { c.output_dir = v; }},
      {"output.bitmap", "write startup.pgm from simulate", [](C& c, S v) { c.output_bitmap = parse_bool(v); }},
      {"output.bitmap_width", "PGM row width in pixels", [](C& c, S v) { c.output_bitmap_width = parse_uint(v); }},
  };
  return keys;
}

/// Semantic checks that single-key parsing cannot do.
inline void validate(const ExperimentConfig& c) {
  c.geometry.validate();
  c.params.validate();
  c.env.validate();
  if (c.puf_reads < 2) throw ArgumentError("puf.reads must be >= 2");
  if (c.puf_id_length < 1) throw ArgumentError("puf.id_length must be >= 1");
  if (!(c.puf_threshold >= 0.0 && c.puf_threshold <= 1.0)) throw ArgumentError("puf.threshold must be in [0, 1]");
  if (c.puf_devices < 1) throw ArgumentError("puf.devices must be >= 1");
  if (c.trng_bits < 1) throw ArgumentError("trng.bits must be >= 1");
  if (c.trng_rounds < 1) throw ArgumentError("trng.rounds must be >= 1");
  if (c.trng_trials < 1) throw ArgumentError("trng.trials must be >= 1");
  if (c.trng_starvation_budget < 1) throw ArgumentError("trng.starvation_budget must be >= 1");
  trng::DebiasSpec::parse(c.trng_debias);
  c.dvft_profile.validate();
  c.dvft_params.validate();
  if (!(c.nist.alpha > 0.0 && c.nist.alpha < 1.0)) throw ArgumentError("nist.alpha must be in (0, 1)");
  if (!(c.calibration_target > 0.0 && c.calibration_target < 1.0)) throw ArgumentError("calibration.target must be in (0, 1)");
  if (c.output_bitmap_width < 1) throw ArgumentError("output.bitmap_width must be >= 1");
}

/// Line-oriented `section.key = value`; '#' starts a comment. Unknown or
/// repeated keys and malformed values raise ConfigError with the line number.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig config = {}) {
  std::map<std::string, const ConfigKey*> index;
  for (const auto& k : config_keys()) index[k.name] = &k;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'section.key = value'", number);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError("unknown key '" + key + "'", number);
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigError("key '" + key + "' already set on line " + std::to_string(prev->second), number);
    }
    seen[key] = number;
    try {
      it->second->apply(config, value);
    } catch (const ArgumentError& e) {
      throw ConfigError(key + ": " + e.what(), number);
    }
  }
  try {
    validate(config);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return config;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config");
  return parse_config(in);
}

}  // namespace silicon_entropy::cli
