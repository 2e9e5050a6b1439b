#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "silicon_entropy/calibration.hpp"
#include "silicon_entropy/cli/config.hpp"
#include "silicon_entropy/dram_io.hpp"
#include "silicon_entropy/dram_model.hpp"
#include "silicon_entropy/dvft.hpp"
#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/parallel.hpp"
#include "silicon_entropy/puf.hpp"
#include "silicon_entropy/randtest/suite.hpp"
#include "silicon_entropy/trng.hpp"

namespace silicon_entropy::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* kToolName = "silicon-entropy";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSeedEnvVar = "SILICON_ENTROPY_SEED";

enum ExitCode : int { kExitOk = 0, kExitRejected = 1, kExitUsage = 2, kExitIo = 3 };

// Sub-seed tags per command, so commands on one device seed draw independent streams.
inline constexpr std::uint64_t kTagSimulate = 0x51;
inline constexpr std::uint64_t kTagEnroll = 0xE7;
inline constexpr std::uint64_t kTagIdentify = 0x1D;
inline constexpr std::uint64_t kTagAuth = 0xA7;
inline constexpr std::uint64_t kTagTrng = 0x7E;
inline constexpr std::uint64_t kTagKnee = 0x4E;
inline constexpr std::uint64_t kTagAging = 0xA6;
inline constexpr std::uint64_t kTagCalibrate = 0xCA;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  unsigned jobs = 1;
  std::string out_dir;
};

struct CommandOptions {
  // simulate
  bool bitmap = false;
  std::optional<std::size_t> bitmap_width;
  // enroll
  std::optional<std::size_t> devices;
  std::optional<std::size_t> reads;
  std::optional<std::size_t> id_length;
  // auth
  std::string stored_path;
  std::string candidate_path;
  std::string mask_path;
  std::string device_path;
  std::optional<double> threshold;
  // trng
  std::string source;
  std::optional<std::size_t> bits;
  std::optional<double> delay_ms;
  std::string debias;
  std::string profile;
  // nist
  std::string input_path;
  std::optional<double> alpha;
  std::optional<std::size_t> block_size;
  // calibrate
  std::optional<double> target;
};

/// Resolved inputs for one command.
struct Context {
  ExperimentConfig config;
  GlobalOptions global;
  CommandOptions cmd;
  std::ostream* out = &std::cout;

  fs::path out_path(const std::string& name) const { return fs::path(config.output_dir) / name; }
  unsigned jobs() const { return global.jobs == 0 ? 1 : global.jobs; }
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline json meta(const Context& ctx, const std::string& command) {
  json m{{"tool", kToolName}, {"version", kToolVersion}, {"command", command}, {"seed", ctx.config.seed}};
  if (!ctx.global.deterministic) m["timestamp"] = utc_timestamp();
  return m;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
}

inline std::ofstream open_out(const fs::path& path, bool binary = false) {
  ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  return out;
}

inline void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

inline void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

inline dram::DramDevice make_device(const ExperimentConfig& c, std::uint64_t seed) {
  return dram::DramDevice(seed, c.geometry, c.params);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each returns a process exit code.

inline int cmd_simulate(const Context& ctx) {
  const auto& c = ctx.config;
  auto device = detail::make_device(c, c.seed);
  json doc = dram::descriptor(device);
  doc["meta"] = detail::meta(ctx, "simulate");
  detail::write_json(ctx.out_path("device.json"), doc);
  *ctx.out << "device.json: seed " << c.seed << ", " << device.capacity() << " cells\n";
  if (ctx.cmd.bitmap || c.output_bitmap) {
    const std::size_t width = ctx.cmd.bitmap_width.value_or(c.output_bitmap_width);
    const BitVector startup = device.power_up_read(c.env, derive_seed(c.seed, kTagSimulate));
    const auto path = ctx.out_path("startup.pgm");
    auto out = detail::open_out(path, true);
    dram::write_pgm(out, startup, width);
    detail::finish(out, path);
    *ctx.out << "startup.pgm: " << width << " px per row, ones fraction " << ones_fraction(startup) << '\n';
  }
  return kExitOk;
}

inline int cmd_enroll(const Context& ctx) {
  const auto& c = ctx.config;
  const std::size_t devices = ctx.cmd.devices.value_or(c.puf_devices);
  const std::size_t reads = ctx.cmd.reads.value_or(c.puf_reads);
  const std::size_t id_length = ctx.cmd.id_length.value_or(c.puf_id_length);
  if (devices < 1) throw ArgumentError("--devices must be >= 1");
  const auto conditions = c.enrollment_conditions();

  struct Result {
    std::uint64_t seed = 0;
    puf::EnrollmentMask mask;
    puf::Fingerprint fingerprint;
    BitVector first_read;
  };
  std::vector<Result> results(devices);
  parallel_for(devices, ctx.jobs(), [&](std::size_t i) {
    Result& r = results[i];
    r.seed = c.seed + i;
    auto device = detail::make_device(c, r.seed);
    r.first_read = device.power_up_read(conditions.front(), derive_seed(r.seed, kTagSimulate));
    device.power_off();
    r.mask = puf::enroll_device(device, conditions, reads, derive_seed(r.seed, kTagEnroll));
    r.fingerprint = puf::generate_id(device, r.mask, c.env, id_length, derive_seed(r.seed, kTagIdentify));
  });

  json summary{{"meta", detail::meta(ctx, "enroll")}, {"devices", devices}, {"reads_per_condition", reads},
               {"id_length", id_length}};
  json per_device = json::array();
  for (const auto& r : results) {
    const fs::path dir = devices == 1 ? fs::path(c.output_dir) : fs::path(c.output_dir) / ("device_" + std::to_string(r.seed));
    detail::write_json(dir / "mask.json", puf::to_json(r.mask));
    detail::write_json(dir / "fingerprint.json", puf::to_json(r.fingerprint));
    per_device.push_back({{"seed", r.seed}, {"stable_fraction", r.mask.fraction()}, {"stable_cells", r.mask.size()},
                          {"fingerprint", r.fingerprint.bits.to_hex()}});
    *ctx.out << "device " << r.seed << ": stable fraction " << r.mask.fraction() << ", id " << r.fingerprint.bits.to_hex()
             << '\n';
  }
  summary["per_device"] = per_device;
  if (devices >= 2) {
    std::vector<puf::Fingerprint> fps;
    std::vector<BitVector> raw;
    for (const auto& r : results) {
      fps.push_back(r.fingerprint);
      raw.push_back(r.first_read);
    }
    const double hd = puf::inter_hd(fps);
    const double hd_raw = puf::mean_pairwise_hd(raw, "inter_hd_raw");
    summary["inter_hd"] = hd;
    summary["inter_hd_raw"] = hd_raw;
    *ctx.out << "inter-die HD: fingerprints " << hd << ", raw startup " << hd_raw << '\n';
  }
  detail::write_json(ctx.out_path("enroll.json"), summary);
  return kExitOk;
}

inline int cmd_auth(const Context& ctx) {
  const auto& c = ctx.config;
  if (ctx.cmd.stored_path.empty()) throw ArgumentError("auth: --stored is required");
  const puf::Fingerprint stored = puf::fingerprint_from_json(detail::read_json(ctx.cmd.stored_path));
  puf::Fingerprint candidate;
  if (!ctx.cmd.candidate_path.empty()) {
    candidate = puf::fingerprint_from_json(detail::read_json(ctx.cmd.candidate_path));
  } else {
    if (ctx.cmd.mask_path.empty()) throw ArgumentError("auth: give --candidate, or --mask to read the device");
    const puf::EnrollmentMask mask = puf::mask_from_json(detail::read_json(ctx.cmd.mask_path));
    auto device = ctx.cmd.device_path.empty() ? detail::make_device(c, c.seed)
                                              : dram::device_from_descriptor(detail::read_json(ctx.cmd.device_path));
    candidate = puf::generate_id(device, mask, c.env, stored.bits.size(), derive_seed(device.seed(), kTagAuth));
  }
  const double threshold = ctx.cmd.threshold.value_or(c.puf_threshold);
  const puf::AuthDecision decision = puf::authenticate(candidate, stored, threshold);
  json doc = puf::to_json(decision);
  doc["candidate"] = candidate.device_label;
  doc["stored"] = stored.device_label;
  doc["meta"] = detail::meta(ctx, "auth");
  detail::write_json(ctx.out_path("auth.json"), doc);
  *ctx.out << (decision.accepted ? "ACCEPT" : "REJECT") << " fractional_hd " << decision.fractional_hd << " threshold "
           << threshold << '\n';
  return decision.accepted ? kExitOk : kExitRejected;
}

inline ExperimentKind trng_kind(const Context& ctx) {
  const std::string& s = ctx.cmd.source;
  if (s.empty()) {
    const auto k = ctx.config.kind;
    if (k == ExperimentKind::trng_startup || k == ExperimentKind::trng_dvft) return k;
    return ExperimentKind::trng_remanence;
  }
  if (s == "remanence") return ExperimentKind::trng_remanence;
  if (s == "startup") return ExperimentKind::trng_startup;
  if (s == "dvft") return ExperimentKind::trng_dvft;
  throw ArgumentError("--source must be remanence, startup or dvft");
}

inline int cmd_trng(const Context& ctx) {
  const auto& c = ctx.config;
  const std::size_t bits = ctx.cmd.bits.value_or(c.trng_bits);
  if (bits < 1) throw ArgumentError("--bits must be >= 1");
  const ExperimentKind kind = trng_kind(ctx);
  json summary{{"meta", detail::meta(ctx, "trng")}, {"source", to_string(kind)}, {"bits", bits}};
  BitVector output;

  if (kind == ExperimentKind::trng_dvft) {
    dvft::SupplyProfile profile = ctx.cmd.profile.empty() ? c.dvft_profile : dvft::builtin_profile(ctx.cmd.profile);
    const double init = profile.mean_v * (1.0 + c.dvft_init_offset);
    auto run = dvft::run_dvft(profile, init, c.dvft_warmup_bits + bits, derive_seed(c.seed, kTagTrng), c.dvft_params,
                              c.dvft_trace_stride);
    if (c.dvft_trace_stride > 0) {
      const auto path = ctx.out_path("dvft_trace.csv");
      auto out = detail::open_out(path);
      dvft::write_trace_csv(out, run.trace);
      detail::finish(out, path);
    }
    summary["profile"] = profile.name;
    summary["init_v_ref"] = init;
    summary["final_v_ref"] = run.final_state.v_ref;
    summary["warmup_bits"] = c.dvft_warmup_bits;
    output = run.bits.slice(c.dvft_warmup_bits, bits);
  } else {
    auto device = detail::make_device(c, c.seed);
    const std::string debias_text = ctx.cmd.debias.empty() ? c.trng_debias : ctx.cmd.debias;
    const auto debias = trng::DebiasSpec::parse(debias_text);
    trng::SourceConfig source;
    if (kind == ExperimentKind::trng_remanence) {
      trng::RemanenceSource rem;
      rem.cfg.env = c.env;
      rem.cfg.rounds = c.trng_rounds;
      rem.cfg.extraction_mode = c.trng_mode;
      rem.cfg.layout = c.trng_layout;
      rem.cfg.write_value = c.trng_write_value;
      const auto delay = ctx.cmd.delay_ms ? ctx.cmd.delay_ms : c.trng_delay_ms;
      if (delay) {
        rem.cfg.delay_ms = *delay;
      } else {
        trng::KneeSearch search;
        search.rounds = c.trng_knee_rounds;
        search.env = c.env;
        search.write_value = c.trng_write_value;
        rem.cfg.delay_ms = trng::find_knee_delay(device, search, derive_seed(c.seed, kTagKnee)).delay_ms;
        summary["knee_search"] = true;
      }
      summary["delay_ms"] = rem.cfg.delay_ms;
      summary["mode"] = trng::to_string(rem.cfg.extraction_mode);
      summary["rounds"] = rem.cfg.rounds;
      source = rem;
    } else {
      source = trng::StartupSource{c.env, c.trng_trials, c.trng_layout};
      summary["trials"] = c.trng_trials;
    }
    summary["layout"] = trng::to_string(c.trng_layout);
    summary["debias"] = debias.to_string();
    trng::PipelineOptions options;
    options.starvation_budget = c.trng_starvation_budget;
    auto result = trng::run_pipeline(device, source, debias, bits, derive_seed(c.seed, kTagTrng), options);
    const auto path = ctx.out_path("trng_log.csv");
    auto out = detail::open_out(path);
    trng::write_run_log_csv(out, result.log);
    detail::finish(out, path);
    summary["source_blocks"] = result.source_blocks;
    summary["yield"] = result.yield();
    output = std::move(result.bits);
  }
  dram::write_packed_file(ctx.out_path("trng.bin"), output);
  summary["ones_fraction"] = ones_fraction(output);
  detail::write_json(ctx.out_path("trng.json"), summary);
  *ctx.out << "trng.bin: " << output.size() << " bits, ones fraction " << ones_fraction(output) << '\n';
  return kExitOk;
}

inline int cmd_nist(const Context& ctx) {
  const auto& c = ctx.config;
  if (ctx.cmd.input_path.empty()) throw ArgumentError("nist: an input bitstream path is required");
  const BitVector bits = dram::read_bitstream(ctx.cmd.input_path);
  randtest::SuiteConfig suite = c.nist;
  if (ctx.cmd.alpha) suite.alpha = *ctx.cmd.alpha;
  if (ctx.cmd.block_size) suite.block_size = *ctx.cmd.block_size;
  suite.jobs = ctx.jobs();
  const auto report = randtest::run_suite(bits, suite);
  json doc = randtest::to_json(report);
  doc["meta"] = detail::meta(ctx, "nist");
  detail::write_json(ctx.out_path("nist_report.json"), doc);
  std::ostringstream table;
  randtest::write_text_table(table, report);
  const auto path = ctx.out_path("nist_report.txt");
  auto out = detail::open_out(path);
  out << table.str();
  detail::finish(out, path);
  *ctx.out << table.str() << (report.all_pass ? "all tests pass" : "suite FAILED") << " (n = " << bits.size()
           << ", alpha = " << suite.alpha << ")\n";
  return report.all_pass ? kExitOk : kExitRejected;
}

inline int cmd_aging(const Context& ctx) {
  const auto& c = ctx.config;
  auto device = detail::make_device(c, c.seed);
  puf::AgingCampaign campaign = c.aging;
  campaign.env = c.env;
  const auto schedule = puf::table_schedule(campaign);
  const auto rows = puf::stability_report(device, schedule, derive_seed(c.seed, kTagAging));
  {
    const auto path = ctx.out_path("aging.csv");
    auto out = detail::open_out(path);
    out << "epoch,stable_fraction\n";
    for (const auto& r : rows) out << r.label << ',' << r.stable_fraction << '\n';
    detail::finish(out, path);
  }
  {
    const auto path = ctx.out_path("stability.csv");
    auto out = detail::open_out(path);
    puf::write_stability_csv(out, rows);
    detail::finish(out, path);
  }
  for (const auto& r : rows) *ctx.out << std::left << std::setw(20) << r.label << r.stable_fraction << '\n';
  return kExitOk;
}

inline int cmd_calibrate(const Context& ctx) {
  const auto& c = ctx.config;
  const double target = ctx.cmd.target.value_or(c.calibration_target);
  const std::size_t reads = ctx.cmd.reads.value_or(c.calibration_reads);
  const auto cal = dram::calibrate_noise(target, reads, c.params.sigma_cap);
  dram::ProcessParams params = c.params;
  params.sigma_noise0 = cal.sigma_noise0;
  dram::DramDevice device(c.seed, c.geometry, params);
  const double measured = puf::measure_stable_fraction(device, c.env, reads, derive_seed(c.seed, kTagCalibrate));
  json doc{{"meta", detail::meta(ctx, "calibrate")},
           {"target_fraction", target},
           {"reads", reads},
           {"sigma_cap", c.params.sigma_cap},
           {"noise_ratio", cal.noise_ratio},
           {"sigma_noise0", cal.sigma_noise0},
           {"predicted_fraction", cal.predicted_fraction},
           {"measured_fraction", measured},
           {"config_line", "device.sigma_noise0 = " + std::to_string(cal.sigma_noise0)}};
  detail::write_json(ctx.out_path("calibration.json"), doc);
  *ctx.out << "sigma_noise0 " << cal.sigma_noise0 << " (ratio " << cal.noise_ratio << "): predicted "
           << cal.predicted_fraction << ", measured " << measured << " over " << reads << " reads\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

/// Holds the parser and the option targets it writes into.
struct Cli {
  CLI::App app{"Behavioral DRAM PUF/TRNG simulator and randomness test harness", kToolName};
  GlobalOptions global;
  CommandOptions cmd;
  std::string selected;

  Cli() {
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kToolVersion, "Print the version and exit");
    app.add_option("--config", global.config_path, "Config file of 'section.key = value' lines");
    app.add_option("--seed", global.seed, "Seed; overrides " + std::string(kSeedEnvVar) + " and device.seed");
    app.add_flag("--deterministic", global.deterministic, "Omit timestamps so outputs are byte-reproducible");
    app.add_option("--jobs", global.jobs, "Worker threads for independent devices or tests")->check(CLI::PositiveNumber);
    app.add_option("--out", global.out_dir, "Output directory (overrides output.dir)");

    auto* sim = app.add_subcommand("simulate", "Create a device and write its descriptor (device.json)");
    sim->add_flag("--bitmap", cmd.bitmap, "Also write the startup state as startup.pgm");
    sim->add_option("--bitmap-width", cmd.bitmap_width, "PGM row width in pixels")->check(CLI::PositiveNumber);

    auto* enroll = app.add_subcommand("enroll", "Enroll stable cells and write mask.json and fingerprint.json");
    enroll->add_option("--devices", cmd.devices, "Enroll N devices with seeds seed .. seed+N-1")->check(CLI::PositiveNumber);
    enroll->add_option("--reads", cmd.reads, "Startup reads per enrollment condition");
    enroll->add_option("--id-length", cmd.id_length, "Fingerprint length in bits");

    auto* auth = app.add_subcommand("auth", "Compare a candidate fingerprint with a stored one (exit 0 accept, 1 reject)");
    auth->add_option("--stored", cmd.stored_path, "Stored fingerprint JSON")->required();
    auth->add_option("--candidate", cmd.candidate_path, "Candidate fingerprint JSON");
    auth->add_option("--mask", cmd.mask_path, "Enrollment mask used to read a fresh candidate from the device");
    auth->add_option("--device", cmd.device_path, "Device descriptor JSON to read from (default: config device)");
    auth->add_option("--threshold", cmd.threshold, "Maximum fractional Hamming distance to accept, in [0, 1]");

    auto* trng_cmd = app.add_subcommand("trng", "Generate a random bitstream (trng.bin, trng_log.csv)");
    trng_cmd->add_option("--source", cmd.source, "remanence, startup or dvft (default from experiment.kind)");
    trng_cmd->add_option("--bits", cmd.bits, "Output length in bits");
    trng_cmd->add_option("--delay-ms", cmd.delay_ms, "Remanence delay; omitted means the knee search picks it");
    trng_cmd->add_option("--debias", cmd.debias, "Debias stages, e.g. von_neumann,xor_fold:2 or none");
    trng_cmd->add_option("--profile", cmd.profile, "DVFT supply profile: bench, usb, computer or dc");

    auto* nist = app.add_subcommand("nist", "Run the randomness test suite on a bitstream file");
    nist->add_option("input", cmd.input_path, "Packed or ASCII 0/1 bitstream")->required();
    nist->add_option("--alpha", cmd.alpha, "Significance level");
    nist->add_option("--block-size", cmd.block_size, "Block frequency block size M");

    app.add_subcommand("aging", "Replay the nine-epoch aging campaign (aging.csv, stability.csv)");

    auto* cal = app.add_subcommand("calibrate", "Fit read noise to a target stable fraction (calibration.json)");
    cal->add_option("--target", cmd.target, "Target stable fraction");
    cal->add_option("--reads", cmd.reads, "Reads the target refers to");

    for (auto* sub : app.get_subcommands({})) {
      sub->callback([this, sub] { selected = sub->get_name(); });
    }
  }
};

/// Seed precedence: --seed, then SILICON_ENTROPY_SEED, then device.seed.
inline ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig config = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (const char* env = std::getenv(kSeedEnvVar); env && *env) {
    try {
      config.seed = detail::parse_uint(env);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string(kSeedEnvVar) + ": " + e.what());
    }
  }
  if (g.seed) config.seed = *g.seed;
  if (!g.out_dir.empty()) config.output_dir = g.out_dir;
  return config;
}

inline int dispatch(const std::string& name, const Context& ctx) {
  if (name == "simulate") return cmd_simulate(ctx);
  if (name == "enroll") return cmd_enroll(ctx);
  if (name == "auth") return cmd_auth(ctx);
  if (name == "trng") return cmd_trng(ctx);
  if (name == "nist") return cmd_nist(ctx);
  if (name == "aging") return cmd_aging(ctx);
  if (name == "calibrate") return cmd_calibrate(ctx);
  throw ArgumentError("unknown command '" + name + "'");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Cli cli;
  try {
    cli.app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    Context ctx{resolve_config(cli.global), cli.global, cli.cmd, &out};
    return dispatch(cli.selected, ctx);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace silicon_entropy::cli
