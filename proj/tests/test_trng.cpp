#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/trng.hpp"
#include "support/generators.hpp"
#include "support/stats.hpp"

namespace se = silicon_entropy;
namespace trng = se::trng;
using se::BitVector;
using se::dram::ArrayGeometry;
using se::dram::DramDevice;
using se::dram::EnvCondition;
using se::dram::ProcessParams;

namespace {

BitVector bernoulli(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution d(p);
  BitVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (d(rng)) out.set(i);
  }
  return out;
}

const ArrayGeometry kSmall{16, 16, 16};

DramDevice powered_device(std::uint64_t seed, const ArrayGeometry& g = kSmall, ProcessParams p = {}) {
  DramDevice d(seed, g, p);
  d.power_up_read(EnvCondition::nominal(), 1);
  return d;
}

}  // namespace

TEST(Config, ParseNames) {
  EXPECT_EQ(trng::parse_extraction_mode("xor-consecutive"), trng::ExtractionMode::xor_consecutive);
  EXPECT_EQ(trng::parse_extraction_mode("flip_mask"), trng::ExtractionMode::flip_mask);
  EXPECT_EQ(trng::to_string(trng::ExtractionMode::raw_read), "raw-read");
  EXPECT_EQ(trng::parse_layout("cell-major"), trng::BitLayout::cell_major);
  EXPECT_THROW(trng::parse_extraction_mode("bogus"), se::ArgumentError);
  trng::RemanenceConfig cfg;
  cfg.extraction_mode = trng::ExtractionMode::xor_consecutive;
  EXPECT_THROW(cfg.validate(), se::ArgumentError);
  cfg.rounds = 2;
  EXPECT_NO_THROW(cfg.validate());
  cfg.delay_ms = -1;
  EXPECT_THROW(cfg.validate(), se::ArgumentError);
}

TEST(Remanence, ZeroDelayReadsAllOnes) {
  auto d = powered_device(1);
  trng::RemanenceConfig cfg;
  cfg.delay_ms = 0.0;
  const auto out = trng::remanence_extract(d, cfg, 3);
  EXPECT_EQ(out.popcount(), d.capacity());
  cfg.extraction_mode = trng::ExtractionMode::flip_mask;
  EXPECT_EQ(trng::remanence_extract(d, cfg, 4).popcount(), 0u);
}

TEST(Remanence, FullDecayEqualsNoiselessStartup) {
  ProcessParams p;
  p.sigma_noise0 = 0.0;
  auto d = powered_device(2, kSmall, p);
  DramDevice twin(2, kSmall, p);
  const auto startup = twin.power_up_read(EnvCondition::nominal(), 9);
  trng::RemanenceConfig cfg;
  cfg.delay_ms = 1e12;
  EXPECT_EQ(trng::remanence_extract(d, cfg, 5), startup);
}

TEST(Remanence, OnesFractionFallsWithDelay) {
  double prev = 1.0;
  for (double delay : {0.0, 5.0, 20.0, 40.0, 60.0, 100.0, 200.0, 400.0}) {
    auto d = powered_device(6);
    trng::RemanenceConfig cfg;
    cfg.delay_ms = delay;
    const double f = se::ones_fraction(trng::remanence_extract(d, cfg, 77));
    EXPECT_LE(f, prev) << delay;
    prev = f;
  }
  EXPECT_LT(prev, 0.6);
}

TEST(Remanence, XorConsecutiveWithVonNeumannIsBalanced) {
  // xor of two reads alone gives P(1) = 2 p (1 - p) <= 1/2; a von Neumann
  // stage on the cell-major stream removes the residual bias.
  auto d = powered_device(7, ArrayGeometry::one_megabit());
  trng::RemanenceConfig cfg;
  cfg.delay_ms = 250.0;
  cfg.rounds = 3;
  cfg.extraction_mode = trng::ExtractionMode::xor_consecutive;
  cfg.layout = trng::BitLayout::cell_major;
  const auto raw = trng::remanence_extract(d, cfg, 11);
  EXPECT_EQ(raw.size(), 2 * d.capacity());
  EXPECT_LE(se::ones_fraction(raw), 0.5);
  const auto vn = trng::von_neumann(raw);
  ASSERT_GT(vn.size(), 4000u);
  EXPECT_NEAR(se::ones_fraction(vn), 0.5, 3 * stats::binomial_sigma(0.5, static_cast<double>(vn.size())));
}

TEST(Startup, NoiselessTrialsRepeat) {
  ProcessParams p;
  p.sigma_noise0 = 0.0;
  DramDevice d(3, kSmall, p);
  const auto out = trng::startup_extract(d, EnvCondition::nominal(), 1, 2);
  ASSERT_EQ(out.size(), 2 * d.capacity());
  EXPECT_EQ(out.slice(0, d.capacity()), out.slice(d.capacity(), d.capacity()));
  EXPECT_FALSE(d.powered());
}

TEST(Startup, NoisyTrialsDiffer) {
  DramDevice d(3, kSmall, {});
  const auto out = trng::startup_extract(d, EnvCondition::nominal(), 1, 6);
  for (std::size_t t = 1; t < 6; ++t) {
    EXPECT_NE(out.slice(0, d.capacity()), out.slice(t * d.capacity(), d.capacity()));
  }
}

TEST(Startup, PatternShowsLagSixteenAnticorrelation) {
  ProcessParams p;
  p.pattern_strength = 0.3;
  DramDevice d(3, kSmall, p);
  const auto out = trng::startup_extract(d, EnvCondition::nominal(), 1, 2);
  double num = 0, den = 0;
  for (std::size_t i = 0; i + 16 < out.size(); ++i) num += (out[i] ? 1 : -1) * (out[i + 16] ? 1 : -1);
  den = static_cast<double>(out.size() - 16);
  EXPECT_LT(num / den, -0.5);
}

TEST(VonNeumann, Examples) {
  EXPECT_EQ(trng::von_neumann(BitVector::from_string("0101 0101")).to_string(), "0000");
  EXPECT_EQ(trng::von_neumann(BitVector::from_string("1010 1")).to_string(), "11");
  EXPECT_TRUE(trng::von_neumann(BitVector::from_string(std::string(64, '1'))).empty());
  EXPECT_TRUE(trng::von_neumann(BitVector()).empty());
}

TEST(VonNeumann, BiasedInputYieldAndBalance) {
  const std::size_t pairs = 1'000'000;
  const auto raw = bernoulli(2 * pairs, 0.7, 1);
  const auto out = trng::von_neumann(raw);
  EXPECT_NEAR(static_cast<double>(out.size()) / pairs, 0.42, 0.002);
  EXPECT_NEAR(se::ones_fraction(out), 0.5, 0.003);
}

TEST(VonNeumannProperty, UnbiasedAtEveryInputBias) {
  for (double p : {0.3, 0.5, 0.7, 0.9}) {
    const std::size_t need = 100'000;
    const std::size_t pairs = static_cast<std::size_t>(1.1 * need / (2 * p * (1 - p)));
    const auto out = trng::von_neumann(bernoulli(2 * pairs, p, static_cast<std::uint64_t>(p * 100)));
    ASSERT_GE(out.size(), need);
    EXPECT_NEAR(se::ones_fraction(out), 0.5, 3 * stats::binomial_sigma(0.5, static_cast<double>(out.size()))) << p;
  }
}

TEST(XorFold, Examples) {
  EXPECT_EQ(trng::xor_fold(BitVector::from_string("1100"), 2).to_string(), "00");
  EXPECT_EQ(trng::xor_fold(BitVector::from_string("1001"), 2).to_string(), "11");
  EXPECT_EQ(trng::xor_fold(BitVector::from_string("11010"), 2).to_string(), "01");
  const auto raw = BitVector::from_string("1011001");
  EXPECT_EQ(trng::xor_fold(raw, raw.size()).to_string(), "0");
  EXPECT_THROW(trng::xor_fold(raw, 8), se::ArgumentError);
  EXPECT_THROW(trng::xor_fold(raw, 1), se::ArgumentError);
}

TEST(XorFold, PilingUpExample) {
  EXPECT_NEAR(trng::piling_up(0.7, 4), 0.4872, 1e-12);
  const auto out = trng::xor_fold(bernoulli(4'000'000, 0.7, 2), 4);
  ASSERT_EQ(out.size(), 1'000'000u);
  EXPECT_NEAR(se::ones_fraction(out), 0.4872, 0.0015);
}

TEST(XorFoldProperty, PilingUpLaw) {
  gen::Rng rng(3);
  for (std::size_t k : {2u, 4u, 8u}) {
    for (int trial = 0; trial < 5; ++trial) {
      const double p = 0.05 + 0.9 * rng.unit();
      const std::size_t out_n = 200'000;
      const auto out = trng::xor_fold(bernoulli(out_n * k, p, rng.next()), k);
      const double expect = trng::piling_up(p, k);
      EXPECT_NEAR(se::ones_fraction(out), expect, 3 * stats::binomial_sigma(expect, out_n) + 1e-9)
          << "k " << k << " p " << p;
    }
  }
}

TEST(DebiasSpec, ParseAndPrint) {
  const auto spec = trng::DebiasSpec::parse("von_neumann, xor_fold:4");
  ASSERT_EQ(spec.stages.size(), 2u);
  EXPECT_EQ(spec.to_string(), "von_neumann,xor_fold:4");
  EXPECT_TRUE(trng::DebiasSpec::parse("none").stages.empty());
  EXPECT_TRUE(trng::DebiasSpec::parse("").stages.empty());
  EXPECT_THROW(trng::DebiasSpec::parse("xor_fold:1"), se::ArgumentError);
  EXPECT_THROW(trng::DebiasSpec::parse("xor_fold:x"), se::ArgumentError);
  EXPECT_THROW(trng::DebiasSpec::parse("sha256"), se::ArgumentError);
}

TEST(Pipeline, IdentityIsSourcePrefix) {
  DramDevice a(4, kSmall, {});
  DramDevice b(4, kSmall, {});
  const trng::SourceConfig src = trng::StartupSource{};
  const auto out = trng::run_pipeline(a, src, {}, 10'000, 9);
  EXPECT_EQ(out.bits.size(), 10'000u);
  BitVector raw;
  for (std::size_t blk = 0; raw.size() < 10'000; ++blk) raw.append(trng::pull_block(b, src, se::derive_seed(9, blk)));
  EXPECT_EQ(out.bits, raw.slice(0, 10'000));
  EXPECT_EQ(out.source_blocks, 2u);
}

TEST(Pipeline, StarvationNamesStage) {
  DramDevice d(5, kSmall, {});
  trng::RemanenceSource src;
  src.cfg.delay_ms = 0.0;
  try {
    trng::run_pipeline(d, src, trng::DebiasSpec::parse("von_neumann"), 100, 1, {8, false});
    FAIL() << "expected StarvationError";
  } catch (const se::StarvationError& e) {
    EXPECT_EQ(e.stage(), "von_neumann");
    EXPECT_EQ(e.blocks(), 8u);
  }
}

TEST(Pipeline, StagesComposeBlockwise) {
  DramDevice d(6, kSmall, {});
  trng::StartupSource src;
  src.trials = 3;
  const auto spec = trng::DebiasSpec::parse("von_neumann,xor_fold:2");
  const auto out = trng::run_pipeline(d, src, spec, 3000, 4, {64, true});
  BitVector manual;
  for (const auto& raw : out.raw_blocks) manual.append(trng::xor_fold(trng::von_neumann(raw), 2));
  EXPECT_EQ(out.bits, manual.slice(0, 3000));
  EXPECT_EQ(out.log.size(), 3 * out.source_blocks);
  EXPECT_GT(out.yield(), 0.0);
  EXPECT_LT(out.yield(), 0.25);
}

TEST(Pipeline, DeterministicAndLogged) {
  auto run = [] {
    DramDevice d(8, kSmall, {});
    trng::RemanenceSource src;
    src.cfg.delay_ms = 40.0;
    src.cfg.rounds = 3;
    src.cfg.extraction_mode = trng::ExtractionMode::xor_consecutive;
    src.cfg.layout = trng::BitLayout::cell_major;
    return trng::run_pipeline(d, src, trng::DebiasSpec::parse("von_neumann"), 2000, 12);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.bits, b.bits);
  std::ostringstream csv;
  trng::write_run_log_csv(csv, a.log);
  std::istringstream lines(csv.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "stage,in_bits,out_bits,ones_fraction");
  EXPECT_EQ(first.rfind("source:remanence,8192,8192,", 0), 0u);
}

TEST(Knee, EntropyRisesToPlateau) {
  EXPECT_EQ(trng::binary_entropy(0.0), 0.0);
  EXPECT_DOUBLE_EQ(trng::binary_entropy(0.5), 1.0);
  DramDevice d(7, {32, 32, 16}, {});
  trng::KneeSearch search;
  search.delays_ms = {1, 10, 50, 250, 1000};
  const auto knee = trng::find_knee_delay(d, search, 3);
  ASSERT_EQ(knee.sweep.size(), 5u);
  EXPECT_LT(knee.sweep.front().mean_entropy, knee.sweep.back().mean_entropy);
  EXPECT_GE(knee.delay_ms, 50.0);
  double peak = 0;
  for (const auto& pt : knee.sweep) peak = std::max(peak, pt.mean_entropy);
  for (const auto& pt : knee.sweep) {
    if (pt.delay_ms < knee.delay_ms) {
      EXPECT_LT(pt.mean_entropy, 0.95 * peak);
    } else if (pt.delay_ms == knee.delay_ms) {
      EXPECT_GE(pt.mean_entropy, 0.95 * peak);
    }
  }
}
