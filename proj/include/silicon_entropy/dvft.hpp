#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/rng.hpp"

namespace silicon_entropy::dvft {

// Supply voltage = mean_v + drift_v_per_s * t + N(0, noise_sigma_v).
struct SupplyProfile {
  std::string name = "custom";
  double mean_v = 5.0;
  double noise_sigma_v = 0.002;
  double drift_v_per_s = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(mean_v)) throw ArgumentError("supply profile: mean_v must be finite");
    if (!(noise_sigma_v >= 0.0) || !std::isfinite(noise_sigma_v)) {
      throw ArgumentError("supply profile: noise_sigma_v must be >= 0");
    }
    if (!std::isfinite(drift_v_per_s)) throw ArgumentError("supply profile: drift must be finite");
  }
};

// Illustrative values; only the supply names come from measurement reports.
inline std::vector<SupplyProfile> builtin_profiles() {
  return {{"bench", 5.000, 0.002, 0.0, 1},
          {"usb", 5.050, 0.008, 0.001, 2},
          {"computer", 5.020, 0.005, 0.0, 3},
          {"dc", 5.000, 0.003, 0.0, 4}};
}

inline SupplyProfile builtin_profile(const std::string& name) {
  for (const auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  throw ArgumentError("unknown supply profile '" + name + "' (bench, usb, computer, dc)");
}

/// Pure function of (profile, t, rng_seed).
inline double sample_supply(const SupplyProfile& profile, double t, std::uint64_t rng_seed) {
  if (!(t >= 0.0)) throw ArgumentError("sample_supply: t must be >= 0");
  const double base = profile.mean_v + profile.drift_v_per_s * t;
  if (profile.noise_sigma_v == 0.0) return base;
  const std::uint64_t key = derive_seed(profile.seed, rng_seed, std::bit_cast<std::uint64_t>(t));
  return base + profile.noise_sigma_v * hashed_normal(key);
}

// Ties read 0.
constexpr bool comparator_bit(double v, double v_ref) noexcept { return v > v_ref; }

/// Leaky charge accumulator driving the comparator reference:
///
///   cap   <- clamp(cap + charge_step (bit - 1/2) - leak (cap - 1/2), 0, 1)
///   v_ref <- v_ref + gain (cap - 1/2)
///
/// cap is a smoothed ones-rate error and v_ref integrates it, so the fixed
/// point is a ones-rate of 1/2. The low-frequency loop gain
/// K = gain * charge_step / leak sets both the acquisition slew (K / 2 volts
/// per step) and the threshold jitter, whose short-lag bit correlation is
/// about K phi(0) / (2 sigma). The defaults hold that under 1e-3 for the
/// 2 mV bench profile; a 0.5 V offset then takes about 2e5 steps to acquire.
/// Linearized about the fixed point the loop is stable iff
/// gain < stability_bound(params, sigma) and overdamped while
/// gain * charge_step * phi(0) / sigma <= leak^2 / 4.
struct DvftParams {
  double gain = 5e-6;          // volts per step per unit of cap deviation
  double charge_step = 0.05;   // cap change per bit
  double leak = 0.05;          // fraction of cap deviation lost per step
  double dt_s = 1e-6;          // supply sampling period

  void validate() const {
    if (!(gain >= 0.0) || !std::isfinite(gain)) throw ArgumentError("dvft params: gain must be >= 0");
    if (!(charge_step > 0.0 && charge_step <= 1.0)) throw ArgumentError("dvft params: charge_step must be in (0, 1]");
    if (!(leak >= 0.0 && leak < 1.0)) throw ArgumentError("dvft params: leak must be in [0, 1)");
    if (!(dt_s > 0.0) || !std::isfinite(dt_s)) throw ArgumentError("dvft params: dt_s must be > 0");
  }
};

/// Largest gain for which the linearized loop is stable under Gaussian supply
/// noise of the given sigma. With zero leak the loop is only marginally
/// stable at any gain and this returns 0.
inline double stability_bound(const DvftParams& params, double noise_sigma_v) {
  constexpr double phi0 = 0.3989422804014327;  // standard normal density at 0
  if (params.leak == 0.0) return 0.0;
  return (4.0 - 2.0 * params.leak) * noise_sigma_v / (params.charge_step * phi0);
}

struct DvftState {
  double v_ref = 5.0;
  double cap_charge = 0.5;
  double gain = 5e-6;
  std::uint64_t history_ones = 0;
  std::uint64_t step = 0;

  static DvftState start(double init_v_ref, double gain) { return {init_v_ref, 0.5, gain, 0, 0}; }
};

inline DvftState dvft_step(DvftState s, bool bit, const DvftParams& params) {
  const double error = bit ? 0.5 : -0.5;
  s.cap_charge = std::clamp(s.cap_charge + params.charge_step * error - params.leak * (s.cap_charge - 0.5), 0.0, 1.0);
  s.v_ref += s.gain * (s.cap_charge - 0.5);
  s.history_ones += bit ? 1 : 0;
  ++s.step;
  return s;
}

struct TraceRow {
  std::uint64_t step = 0;
  double voltage = 0.0;
  double v_ref = 0.0;  // threshold the sample was compared against
  double cap_charge = 0.0;
  bool bit = false;
};

struct DvftRun {
  BitVector bits;
  std::vector<TraceRow> trace;
  DvftState final_state;
};

/// sample -> compare -> update, n_bits times. Sample k is taken at t = k dt_s.
/// trace_stride = 0 records no trace, otherwise every stride-th step.
inline DvftRun run_dvft(const SupplyProfile& profile, double init_v_ref, std::size_t n_bits, std::uint64_t rng_seed,
                        const DvftParams& params = {}, std::size_t trace_stride = 1) {
  if (n_bits < 1) throw ArgumentError("run_dvft: n_bits must be >= 1");
  if (!std::isfinite(init_v_ref)) throw ArgumentError("run_dvft: init_v_ref must be finite");
  profile.validate();
  params.validate();
  DvftRun run;
  run.bits = BitVector(n_bits);
  if (trace_stride > 0) run.trace.reserve(n_bits / trace_stride + 1);
  DvftState state = DvftState::start(init_v_ref, params.gain);
  for (std::size_t k = 0; k < n_bits; ++k) {
    const double v = sample_supply(profile, static_cast<double>(k) * params.dt_s, rng_seed);
    const bool bit = comparator_bit(v, state.v_ref);
    if (bit) run.bits.set(k);
    const double threshold = state.v_ref;
    state = dvft_step(state, bit, params);
    if (trace_stride > 0 && k % trace_stride == 0) run.trace.push_back({k, v, threshold, state.cap_charge, bit});
  }
  run.final_state = state;
  return run;
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "step,voltage,v_ref,cap_charge,bit\n";
  const auto old = out.precision(10);
  for (const auto& r : trace) {
    out << r.step << ',' << r.voltage << ',' << r.v_ref << ',' << r.cap_charge << ',' << (r.bit ? 1 : 0) << '\n';
  }
  out.precision(old);
}

}  // namespace silicon_entropy::dvft
