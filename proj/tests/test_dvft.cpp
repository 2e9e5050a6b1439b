#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "silicon_entropy/dvft.hpp"
#include "silicon_entropy/errors.hpp"
#include "support/stats.hpp"

namespace se = silicon_entropy;
namespace dvft = se::dvft;

namespace {

double window_fraction(const se::BitVector& bits, std::size_t begin, std::size_t len) {
  return static_cast<double>(bits.popcount(begin, begin + len)) / static_cast<double>(len);
}

struct Moments {
  double mean = 0, var = 0, skew = 0, kurt = 0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.var = m2;
  m.skew = m3 / std::pow(m2, 1.5);
  m.kurt = m4 / (m2 * m2) - 3.0;
  return m;
}

}  // namespace

TEST(Supply, BuiltinProfiles) {
  const auto all = dvft::builtin_profiles();
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(dvft::builtin_profile("bench").noise_sigma_v, 0.002);
  EXPECT_EQ(dvft::builtin_profile("usb").mean_v, 5.05);
  EXPECT_EQ(dvft::builtin_profile("computer").noise_sigma_v, 0.005);
  EXPECT_EQ(dvft::builtin_profile("dc").noise_sigma_v, 0.003);
  EXPECT_THROW(dvft::builtin_profile("mains"), se::ArgumentError);
  dvft::SupplyProfile bad;
  bad.noise_sigma_v = -1;
  EXPECT_THROW(bad.validate(), se::ArgumentError);
}

TEST(Supply, NoiselessIsConstant) {
  const dvft::SupplyProfile p{"flat", 4.2, 0.0, 0.0, 1};
  for (double t : {0.0, 1e-6, 3.5, 100.0}) EXPECT_EQ(dvft::sample_supply(p, t, 9), 4.2);
  EXPECT_THROW(dvft::sample_supply(p, -1.0, 9), se::ArgumentError);
}

TEST(Supply, DeterministicInArguments) {
  const auto p = dvft::builtin_profile("usb");
  EXPECT_EQ(dvft::sample_supply(p, 0.25, 3), dvft::sample_supply(p, 0.25, 3));
  EXPECT_NE(dvft::sample_supply(p, 0.25, 3), dvft::sample_supply(p, 0.25, 4));
}

TEST(Supply, MomentsMatchGaussian) {
  const auto p = dvft::builtin_profile("computer");
  std::vector<double> x;
  for (std::uint64_t s = 0; s < 100'000; ++s) x.push_back(dvft::sample_supply(p, 0.5, s));
  const auto m = moments(x);
  EXPECT_NEAR(m.mean, p.mean_v, 4 * p.noise_sigma_v / std::sqrt(1e5));
  EXPECT_NEAR(std::sqrt(m.var), p.noise_sigma_v, 0.01 * p.noise_sigma_v);
  EXPECT_LT(std::abs(m.skew), 0.05);
  EXPECT_LT(std::abs(m.kurt), 0.1);
}

TEST(Supply, DriftSlopeRecovered) {
  const dvft::SupplyProfile p{"drift", 5.0, 0.008, 0.010, 7};
  // Least-squares slope over 2e5 samples spanning 2 s.
  double st = 0, sv = 0, stt = 0, stv = 0;
  const double n = 200'000;
  for (int k = 0; k < 200'000; ++k) {
    const double t = k * 1e-5;
    const double v = dvft::sample_supply(p, t, 1);
    st += t;
    sv += v;
    stt += t * t;
    stv += t * v;
  }
  const double slope = (n * stv - st * sv) / (n * stt - st * st);
  const double se_slope = p.noise_sigma_v / std::sqrt(stt - st * st / n);
  EXPECT_NEAR(slope, 0.010, 4 * se_slope);
}

TEST(Comparator, TiesReadZero) {
  EXPECT_FALSE(dvft::comparator_bit(5.0, 5.0));
  EXPECT_TRUE(dvft::comparator_bit(std::nextafter(5.0, 6.0), 5.0));
  EXPECT_FALSE(dvft::comparator_bit(4.9, 5.0));
}

TEST(Comparator, SymmetricNoiseIsBalanced) {
  const auto p = dvft::builtin_profile("bench");
  std::size_t ones = 0;
  const std::size_t n = 1'000'000;
  for (std::size_t k = 0; k < n; ++k) ones += dvft::comparator_bit(dvft::sample_supply(p, k * 1e-6, 2), p.mean_v);
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.5, 3 * stats::binomial_sigma(0.5, n));
}

TEST(Step, AllOnesSaturatesAndRaisesThreshold) {
  const dvft::DvftParams params;
  auto s = dvft::DvftState::start(5.0, params.gain);
  double prev = s.v_ref;
  for (int k = 0; k < 1000; ++k) {
    s = dvft::dvft_step(s, true, params);
    EXPECT_GT(s.v_ref, prev);
    EXPECT_GE(s.cap_charge, 0.0);
    EXPECT_LE(s.cap_charge, 1.0);
    prev = s.v_ref;
  }
  EXPECT_NEAR(s.cap_charge, 1.0, 1e-9);
  EXPECT_EQ(s.history_ones, 1000u);
  EXPECT_EQ(s.step, 1000u);
}

TEST(Step, ClampHoldsForExtremeSteps) {
  dvft::DvftParams params;
  params.charge_step = 1.0;
  params.leak = 0.0;
  auto s = dvft::DvftState::start(5.0, params.gain);
  for (int k = 0; k < 10; ++k) {
    s = dvft::dvft_step(s, k % 3 == 0, params);
    ASSERT_GE(s.cap_charge, 0.0);
    ASSERT_LE(s.cap_charge, 1.0);
  }
}

TEST(Step, AlternatingBitsReturnEveryTwoSteps) {
  // cap settles into a two-state cycle symmetric about 1/2, after which each
  // 1,0 pair leaves v_ref unchanged. The settling offset is below
  // gain * charge_step / leak.
  const dvft::DvftParams params;
  auto s = dvft::DvftState::start(5.0, params.gain);
  std::vector<double> even;
  for (int k = 0; k < 4000; ++k) {
    s = dvft::dvft_step(s, k % 2 == 0, params);
    ASSERT_LT(std::abs(s.cap_charge - 0.5), params.charge_step);
    if (k % 2 == 1) even.push_back(s.v_ref);
  }
  for (std::size_t k = 1000; k < even.size(); ++k) EXPECT_NEAR(even[k], even[999], 1e-15);
  EXPECT_LT(std::abs(even.back() - 5.0), params.gain * params.charge_step / params.leak);
}

TEST(Loop, StartAtFixedPointIsBalanced) {
  for (const auto& p : dvft::builtin_profiles()) {
    if (p.drift_v_per_s != 0.0) continue;
    const auto run = dvft::run_dvft(p, p.mean_v, 20'000, 1, {}, 0);
    EXPECT_NEAR(window_fraction(run.bits, 10'000, 10'000), 0.5, 0.02) << p.name;
  }
}

TEST(Loop, RecoversFromTenPercentOffset) {
  // Acquisition slews at gain * charge_step / (2 leak) volts per step.
  for (const auto& p : dvft::builtin_profiles()) {
    for (double sign : {1.0, -1.0}) {
      const auto run = dvft::run_dvft(p, p.mean_v * (1.0 + 0.1 * sign), 260'000, 2, {}, 0);
      EXPECT_NEAR(window_fraction(run.bits, 250'000, 10'000), 0.5, 0.02) << p.name << ' ' << sign;
    }
  }
}

TEST(Loop, TracksDriftWhereOpenLoopDoesNot) {
  const dvft::SupplyProfile p{"drift", 5.0, 0.008, 0.010, 7};
  const auto closed = dvft::run_dvft(p, p.mean_v, 1'000'000, 3, {}, 0);
  for (std::size_t w = 0; w < 100; ++w) {
    EXPECT_NEAR(window_fraction(closed.bits, w * 10'000, 10'000), 0.5, 0.03) << "window " << w;
  }
  dvft::DvftParams open;
  open.gain = 0.0;
  const auto drifting = dvft::run_dvft(p, p.mean_v, 1'000'000, 3, open, 0);
  EXPECT_GT(window_fraction(drifting.bits, 990'000, 10'000), 0.6);
  EXPECT_EQ(drifting.final_state.v_ref, p.mean_v);
}

TEST(Loop, FixedPointIsSupplyMean) {
  for (const auto& p : dvft::builtin_profiles()) {
    if (p.drift_v_per_s != 0.0) continue;
    const auto run = dvft::run_dvft(p, p.mean_v * 1.02, 400'000, 4, {}, 1);
    double mean = 0;
    for (std::size_t k = 300'000; k < 400'000; ++k) mean += run.trace[k].v_ref;
    mean /= 100'000;
    EXPECT_LT(std::abs(mean - p.mean_v), p.noise_sigma_v / 5) << p.name;
  }
}

TEST(Loop, JitterShrinksWithGain) {
  const auto p = dvft::builtin_profile("bench");
  auto jitter = [&](double gain) {
    dvft::DvftParams params;
    params.gain = gain;
    EXPECT_LT(gain, dvft::stability_bound(params, p.noise_sigma_v));
    const auto run = dvft::run_dvft(p, p.mean_v, 300'000, 5, params, 1);
    std::vector<double> v;
    for (std::size_t k = 100'000; k < run.trace.size(); ++k) v.push_back(run.trace[k].v_ref);
    return moments(v).var;
  };
  const double high = jitter(2e-5);
  const double low = jitter(5e-6);
  EXPECT_LT(low, high);
  EXPECT_LT(std::sqrt(high), dvft::builtin_profile("bench").noise_sigma_v);
}

TEST(Loop, StabilityBound) {
  dvft::DvftParams params;
  params.leak = 0.0;
  EXPECT_EQ(dvft::stability_bound(params, 0.002), 0.0);
  params.leak = 0.05;
  params.charge_step = 0.05;
  EXPECT_NEAR(dvft::stability_bound(params, 0.002), 3.9 * 0.002 / (0.05 * 0.3989422804014327), 1e-12);
}

TEST(Loop, ReplayIsBitExact) {
  const auto p = dvft::builtin_profile("usb");
  const auto a = dvft::run_dvft(p, 5.3, 5000, 8, {}, 1);
  const auto b = dvft::run_dvft(p, 5.3, 5000, 8, {}, 1);
  EXPECT_EQ(a.bits, b.bits);
  ASSERT_EQ(a.trace.size(), 5000u);
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    ASSERT_EQ(a.trace[k].v_ref, b.trace[k].v_ref);
    ASSERT_EQ(a.trace[k].cap_charge, b.trace[k].cap_charge);
    ASSERT_EQ(a.trace[k].bit, a.bits[k]);
  }
  EXPECT_THROW(dvft::run_dvft(p, 5.0, 0, 1), se::ArgumentError);
}

TEST(Loop, TraceCsvHeaderAndStride) {
  const auto run = dvft::run_dvft(dvft::builtin_profile("dc"), 5.0, 10, 1, {}, 4);
  ASSERT_EQ(run.trace.size(), 3u);
  EXPECT_EQ(run.trace[1].step, 4u);
  std::ostringstream out;
  dvft::write_trace_csv(out, run.trace);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "step,voltage,v_ref,cap_charge,bit");
}
