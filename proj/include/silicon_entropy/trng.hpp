#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/dram_model.hpp"
#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/rng.hpp"

namespace silicon_entropy::trng {

using dram::DramDevice;
using dram::EnvCondition;

enum class ExtractionMode { raw_read, flip_mask, xor_consecutive };

// round_major: whole read after whole read. cell_major: the per-round bits of
// cell 0, then of cell 1, ... so adjacent bits come from the same cell.
enum class BitLayout { round_major, cell_major };

inline std::string to_string(ExtractionMode m) {
  switch (m) {
    case ExtractionMode::raw_read: return "raw-read";
    case ExtractionMode::flip_mask: return "flip-mask";
    case ExtractionMode::xor_consecutive: return "xor-consecutive";
  }
  return "?";
}

inline ExtractionMode parse_extraction_mode(const std::string& s) {
  if (s == "raw-read" || s == "raw_read") return ExtractionMode::raw_read;
  if (s == "flip-mask" || s == "flip_mask") return ExtractionMode::flip_mask;
  if (s == "xor-consecutive" || s == "xor_consecutive") return ExtractionMode::xor_consecutive;
  throw ArgumentError("unknown extraction mode '" + s + "' (raw-read, flip-mask, xor-consecutive)");
}

inline std::string to_string(BitLayout l) { return l == BitLayout::round_major ? "round-major" : "cell-major"; }

inline BitLayout parse_layout(const std::string& s) {
  if (s == "round-major" || s == "round_major") return BitLayout::round_major;
  if (s == "cell-major" || s == "cell_major") return BitLayout::cell_major;
  throw ArgumentError("unknown layout '" + s + "' (round-major, cell-major)");
}

struct RemanenceConfig {
  double delay_ms = 50.0;
  EnvCondition env = EnvCondition::nominal();
  std::size_t rounds = 1;
  ExtractionMode extraction_mode = ExtractionMode::raw_read;
  BitLayout layout = BitLayout::round_major;
  bool write_value = true;

  void validate() const {
    if (!(delay_ms >= 0.0)) throw ArgumentError("remanence config: delay_ms must be >= 0");
    if (rounds < 1) throw ArgumentError("remanence config: rounds must be >= 1");
    if (extraction_mode == ExtractionMode::xor_consecutive && rounds < 2) {
      throw ArgumentError("remanence config: xor-consecutive needs at least 2 rounds");
    }
    env.validate();
  }
};

namespace detail {

inline BitVector arrange(std::span<const BitVector> blocks, BitLayout layout) {
  if (layout == BitLayout::cell_major) return interleave(blocks);
  BitVector out;
  for (const auto& b : blocks) out.append(b);
  return out;
}

}  // namespace detail

/// Write, power off for delay_ms, power back on and latch, `rounds` times.
/// raw-read keeps the latched bits, flip-mask marks cells that no longer hold
/// the written value, xor-consecutive XORs each round with the next.
inline BitVector remanence_extract(DramDevice& device, const RemanenceConfig& cfg, std::uint64_t rng_seed) {
  cfg.validate();
  std::vector<BitVector> reads;
  reads.reserve(cfg.rounds);
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    device.write_all(cfg.write_value);
    device.power_off_delay(cfg.delay_ms, cfg.env);
    reads.push_back(device.power_up_read(cfg.env, derive_seed(rng_seed, r)));
  }
  std::vector<BitVector> blocks;
  switch (cfg.extraction_mode) {
    case ExtractionMode::raw_read:
      blocks = std::move(reads);
      break;
    case ExtractionMode::flip_mask:
      for (auto& r : reads) blocks.push_back(cfg.write_value ? ~r : r);
      break;
    case ExtractionMode::xor_consecutive:
      for (std::size_t r = 0; r + 1 < reads.size(); ++r) blocks.push_back(reads[r] ^ reads[r + 1]);
      break;
  }
  return detail::arrange(blocks, cfg.layout);
}

/// `trials` full power cycles; the device must start powered off and is left off.
inline BitVector startup_extract(DramDevice& device, const EnvCondition& env, std::uint64_t rng_seed,
                                 std::size_t trials, BitLayout layout = BitLayout::round_major) {
  if (trials < 1) throw ArgumentError("startup_extract: trials must be >= 1");
  std::vector<BitVector> reads;
  reads.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    reads.push_back(device.power_up_read(env, derive_seed(rng_seed, t)));
    device.power_off();
  }
  return detail::arrange(reads, layout);
}

// Non-overlapping pairs: 01 -> 0, 10 -> 1, equal pairs dropped.
inline BitVector von_neumann(const BitVector& raw) {
  BitVector out;
  for (std::size_t i = 0; i + 1 < raw.size(); i += 2) {
    const bool a = raw[i];
    if (a != raw[i + 1]) out.push_back(a);
  }
  return out;
}

// Bit j = parity of raw[jk, jk + k); a short tail is dropped.
inline BitVector xor_fold(const BitVector& raw, std::size_t k) {
  if (k < 2) throw ArgumentError("xor_fold: k must be >= 2");
  if (k > raw.size()) {
    throw ArgumentError("xor_fold: k = " + std::to_string(k) + " exceeds input length " + std::to_string(raw.size()));
  }
  const std::size_t n = raw.size() / k;
  BitVector out(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (raw.popcount(j * k, j * k + k) % 2 == 1) out.set(j);
  }
  return out;
}

// P(1) after XOR-folding k independent bits with P(1) = p.
inline double piling_up(double p, std::size_t k) { return 0.5 * (1.0 - std::pow(1.0 - 2.0 * p, static_cast<double>(k))); }

struct VonNeumann {};
struct XorFold {
  std::size_t k = 2;
};
using DebiasStage = std::variant<VonNeumann, XorFold>;

inline std::string stage_name(const DebiasStage& s) {
  if (std::holds_alternative<VonNeumann>(s)) return "von_neumann";
  return "xor_fold:" + std::to_string(std::get<XorFold>(s).k);
}

struct DebiasSpec {
  std::vector<DebiasStage> stages;

  void validate() const {
    for (const auto& s : stages) {
      if (const auto* x = std::get_if<XorFold>(&s); x && x->k < 2) throw ArgumentError("debias spec: xor_fold needs k >= 2");
    }
  }

  // "von_neumann,xor_fold:2"; empty string or "none" is the identity.
  static DebiasSpec parse(const std::string& text) {
    DebiasSpec spec;
    if (text.empty() || text == "none") return spec;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
      item.erase(std::remove_if(item.begin(), item.end(), [](char c) { return c == ' '; }), item.end());
      if (item == "von_neumann" || item == "vn") {
        spec.stages.emplace_back(VonNeumann{});
      } else if (item.rfind("xor_fold:", 0) == 0) {
        std::size_t k = 0;
        try {
          k = std::stoul(item.substr(9));
        } catch (const std::exception&) {
          throw ArgumentError("debias spec: bad xor_fold parameter in '" + item + "'");
        }
        spec.stages.emplace_back(XorFold{k});
      } else {
        throw ArgumentError("debias spec: unknown stage '" + item + "'");
      }
    }
    spec.validate();
    return spec;
  }

  std::string to_string() const {
    if (stages.empty()) return "none";
    std::string out;
    for (const auto& s : stages) out += (out.empty() ? "" : ",") + stage_name(s);
    return out;
  }
};

inline BitVector apply_stage(const DebiasStage& stage, const BitVector& in) {
  if (std::holds_alternative<VonNeumann>(stage)) return von_neumann(in);
  const std::size_t k = std::get<XorFold>(stage).k;
  if (in.size() < k) return {};  // too short to fold: nothing to emit this block
  return xor_fold(in, k);
}

inline BitVector apply_debias(const DebiasSpec& spec, BitVector bits) {
  for (const auto& s : spec.stages) bits = apply_stage(s, bits);
  return bits;
}

// ---------------------------------------------------------------------------
// Pipelines

struct RemanenceSource {
  RemanenceConfig cfg;
};

// Startup values for key generation; cell-major so a pairwise corrector
// compares a cell against itself across power cycles.
struct StartupSource {
  EnvCondition env = EnvCondition::nominal();
  std::size_t trials = 2;
  BitLayout layout = BitLayout::cell_major;
};

using SourceConfig = std::variant<RemanenceSource, StartupSource>;

struct RunLogRow {
  std::size_t block = 0;
  std::string stage;
  std::size_t in_bits = 0;
  std::size_t out_bits = 0;
  double ones_fraction = 0.0;
};

struct PipelineOptions {
  std::size_t starvation_budget = 64;  // consecutive source blocks with no output
  bool record_raw_blocks = false;
};

struct PipelineResult {
  BitVector bits;
  std::vector<RunLogRow> log;
  std::vector<BitVector> raw_blocks;  // only with record_raw_blocks
  std::size_t source_blocks = 0;
  std::size_t raw_bits = 0;

  double yield() const { return raw_bits ? static_cast<double>(bits.size()) / static_cast<double>(raw_bits) : 0.0; }
};

inline BitVector pull_block(DramDevice& device, const SourceConfig& source, std::uint64_t block_seed) {
  if (const auto* rem = std::get_if<RemanenceSource>(&source)) {
    if (!device.powered()) device.power_up_read(rem->cfg.env, derive_seed(block_seed, 0xB007));
    return remanence_extract(device, rem->cfg, block_seed);
  }
  const auto& st = std::get<StartupSource>(source);
  if (device.powered()) device.power_off();
  return startup_extract(device, st.env, block_seed, st.trials, st.layout);
}

inline std::string source_name(const SourceConfig& source) {
  return std::holds_alternative<RemanenceSource>(source) ? "source:remanence" : "source:startup";
}

/// Pulls one source block at a time, runs it through the debias stages in
/// order and concatenates until target_bits are available. Output is exactly
/// target_bits long; the log has one row per stage per block.
inline PipelineResult run_pipeline(DramDevice& device, const SourceConfig& source, const DebiasSpec& debias,
                                   std::size_t target_bits, std::uint64_t rng_seed, const PipelineOptions& options = {}) {
  if (target_bits < 1) throw ArgumentError("run_pipeline: target_bits must be >= 1");
  debias.validate();
  if (const auto* rem = std::get_if<RemanenceSource>(&source)) rem->cfg.validate();
  if (const auto* st = std::get_if<StartupSource>(&source); st && st->trials < 1) {
    throw ArgumentError("run_pipeline: startup source needs trials >= 1");
  }

  PipelineResult result;
  std::size_t dry_blocks = 0;
  std::string dry_stage;
  while (result.bits.size() < target_bits) {
    const std::size_t block = result.source_blocks++;
    BitVector bits = pull_block(device, source, derive_seed(rng_seed, block));
    result.raw_bits += bits.size();
    result.log.push_back({block, source_name(source), bits.size(), bits.size(), ones_fraction(bits)});
    if (options.record_raw_blocks) result.raw_blocks.push_back(bits);
    std::string emptied = bits.empty() ? source_name(source) : std::string();
    for (const auto& stage : debias.stages) {
      const std::size_t in = bits.size();
      bits = apply_stage(stage, bits);
      result.log.push_back({block, stage_name(stage), in, bits.size(), ones_fraction(bits)});
      if (bits.empty() && emptied.empty()) emptied = stage_name(stage);
    }
    if (bits.empty()) {
      dry_stage = emptied;
      if (++dry_blocks >= options.starvation_budget) throw StarvationError(dry_stage, dry_blocks);
      continue;
    }
    dry_blocks = 0;
    result.bits.append(bits);
  }
  result.bits.resize(target_bits);
  return result;
}

inline void write_run_log_csv(std::ostream& out, std::span<const RunLogRow> rows) {
  out << "stage,in_bits,out_bits,ones_fraction\n";
  for (const auto& r : rows) out << r.stage << ',' << r.in_bits << ',' << r.out_bits << ',' << r.ones_fraction << '\n';
}

// ---------------------------------------------------------------------------
// Delay sweep

struct KneeSearch {
  std::vector<double> delays_ms;  // empty -> log grid around the median retention time
  std::size_t rounds = 4;
  double fraction_of_peak = 0.95;
  EnvCondition env = EnvCondition::nominal();
  bool write_value = true;
};

struct KneePoint {
  double delay_ms = 0.0;
  double mean_entropy = 0.0;  // mean empirical per-cell binary entropy over the rounds
};

struct KneeResult {
  double delay_ms = 0.0;
  std::vector<KneePoint> sweep;
};

inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

// 25 log-spaced delays from tau/20 to 50 tau, tau the median retention time at env.
inline std::vector<double> default_delay_grid(const DramDevice& device, const EnvCondition& env) {
  const double tau_ms = std::exp(device.params().leak_log_tau_mean) * dram::leak_scale(env) * 1e3;
  std::vector<double> grid;
  for (int k = 0; k < 25; ++k) grid.push_back(tau_ms / 20.0 * std::pow(1000.0, k / 24.0));
  return grid;
}

/// Sweeps the remanence delay and returns the knee: the shortest delay whose
/// per-cell read entropy reaches fraction_of_peak of the sweep maximum.
inline KneeResult find_knee_delay(DramDevice& device, const KneeSearch& search, std::uint64_t rng_seed) {
  if (search.rounds < 2) throw ArgumentError("find_knee_delay: need at least 2 rounds per delay");
  if (!(search.fraction_of_peak > 0.0 && search.fraction_of_peak <= 1.0)) {
    throw ArgumentError("find_knee_delay: fraction_of_peak must be in (0, 1]");
  }
  const std::vector<double> grid = search.delays_ms.empty() ? default_delay_grid(device, search.env) : search.delays_ms;
  if (!device.powered()) device.power_up_read(search.env, derive_seed(rng_seed, 0xB007));

  KneeResult result;
  const std::size_t n = device.capacity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    RemanenceConfig cfg;
    cfg.delay_ms = grid[g];
    cfg.env = search.env;
    cfg.rounds = 1;
    cfg.write_value = search.write_value;
    std::vector<std::uint16_t> ones(n, 0);
    for (std::size_t r = 0; r < search.rounds; ++r) {
      const BitVector bits = remanence_extract(device, cfg, derive_seed(rng_seed, g, r));
      for (std::size_t i = 0; i < n; ++i) ones[i] += bits[i] ? 1 : 0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += binary_entropy(static_cast<double>(ones[i]) / static_cast<double>(search.rounds));
    result.sweep.push_back({grid[g], total / static_cast<double>(n)});
  }
  double peak = 0.0;
  for (const auto& p : result.sweep) peak = std::max(peak, p.mean_entropy);
  result.delay_ms = result.sweep.back().delay_ms;
  for (const auto& p : result.sweep) {
    if (p.mean_entropy >= search.fraction_of_peak * peak) {
      result.delay_ms = p.delay_ms;
      break;
    }
  }
  return result;
}

}  // namespace silicon_entropy::trng
