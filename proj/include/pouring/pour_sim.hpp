#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pouring/container.hpp"
#include "pouring/resonance.hpp"
#include "pouring/rng.hpp"

namespace pouring {

// How one pour unfolds: volumetric flow over time plus the starting fill.
struct PourProfile {
  std::function<double(double)> flow_rate_mls;  // t (s) -> ml/s, must be >= 0
  double duration_s = 8.0;
  double initial_liquid_height_mm = 0.0;
  double noise_floor_db = -20.0;  // background noise relative to the resonance peak
};

inline PourProfile constant_flow_profile(double flow_mls, double duration_s,
                                         double initial_height_mm = 0.0,
                                         double noise_floor_db = -20.0) {
  return {[flow_mls](double) { return flow_mls; }, duration_s, initial_height_mm,
          noise_floor_db};
}

// Ground-truth time series for one pour. air_column_mm[i] is by construction
// total_height - liquid_height_mm[i]; weight_g is the poured water mass
// (scale reading tared at the start, 1 g/ml).
struct PourTrace {
  double sample_rate = 0.0;
  std::vector<double> time_s;
  std::vector<double> liquid_height_mm;
  std::vector<double> air_column_mm;
  std::vector<double> weight_g;

  std::size_t size() const { return time_s.size(); }
  bool empty() const { return time_s.empty(); }
  double duration() const { return time_s.empty() ? 0.0 : time_s.back(); }

  double liquid_height_at(double t) const { return interpolate(liquid_height_mm, t); }
  double air_column_at(double t) const { return interpolate(air_column_mm, t); }
  double weight_at(double t) const { return interpolate(weight_g, t); }

 private:
  // Piecewise-linear lookup, clamped at the ends.
  double interpolate(const std::vector<double>& values, double t) const {
    if (time_s.empty()) throw std::logic_error("empty trace");
    if (t <= time_s.front()) return values.front();
    if (t >= time_s.back()) return values.back();
    const auto it = std::upper_bound(time_s.begin(), time_s.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - time_s.begin());
    const std::size_t lo = hi - 1;
    const double u = (t - time_s[lo]) / (time_s[hi] - time_s[lo]);
    return values[lo] + u * (values[hi] - values[lo]);
  }
};

class OverfillError : public std::runtime_error {
 public:
  OverfillError(const std::string& container, double time_s)
      : std::runtime_error("container '" + container + "' overfills at t = " +
                           std::to_string(time_s) + " s"),
        time_s_(time_s) {}
  double overflow_time_s() const { return time_s_; }

 private:
  double time_s_;
};

struct SimulatedPour {
  std::vector<float> waveform;
  PourTrace trace;
  // Fraction of samples whose resonance left the observed 256-2048 Hz band;
  // reported rather than clamped.
  double out_of_band_fraction = 0.0;
};

inline constexpr double kTurbulenceLevel = 0.25;       // relative to the tone amplitude
inline constexpr double kSecondHarmonicLevel = 0.251;  // -12 dB
inline constexpr double kThirdHarmonicLevel = 0.126;   // -18 dB

// Synthesizes one pour: a phase-continuous oscillator tracking the air-column
// resonance (plus 2nd/3rd harmonics), flow-modulated band-limited turbulence,
// and a white background floor. The trace is sampled at the audio rate and
// satisfies air_column = total_height - liquid_height exactly.
// Bit-deterministic for a fixed seed.
inline SimulatedPour simulate_pour(const ContainerSpec& container, const PourProfile& profile,
                                   std::uint32_t sample_rate, std::uint64_t seed) {
  validate(container);
  if (sample_rate < 8000) {
    throw std::invalid_argument("simulate_pour: sample_rate must be >= 8000 Hz");
  }
  if (!(profile.duration_s > 0.0)) {
    throw std::invalid_argument("simulate_pour: duration must be positive");
  }
  if (profile.initial_liquid_height_mm < 0.0 ||
      profile.initial_liquid_height_mm >= container.total_height_mm) {
    throw std::invalid_argument("simulate_pour: initial liquid height outside container");
  }
  if (!profile.flow_rate_mls) {
    throw std::invalid_argument("simulate_pour: flow_rate_mls is not set");
  }

  const std::size_t n = static_cast<std::size_t>(std::llround(profile.duration_s * sample_rate));
  const double dt = 1.0 / sample_rate;
  const double area_mm2 = cross_section_area_mm2(container);
  const double background_amp =
      std::pow(10.0, profile.noise_floor_db / 20.0) * container.resonance_gain;
  const double h2 = container.material_damping * kSecondHarmonicLevel;
  const double h3 = container.material_damping * kThirdHarmonicLevel;

  Rng rng(seed);
  double phase = rng.uniform(0.0, 2.0 * kPi);
  const double ph2 = rng.uniform(0.0, 2.0 * kPi);
  const double ph3 = rng.uniform(0.0, 2.0 * kPi);

  // One-pole band limiting of the turbulence noise (~200 Hz .. ~4 kHz).
  const double alpha_lp = 1.0 - std::exp(-2.0 * kPi * 4000.0 * dt);
  const double alpha_hp = 1.0 - std::exp(-2.0 * kPi * 200.0 * dt);
  double lp = 0.0, hp = 0.0;

  SimulatedPour result;
  result.waveform.resize(n);
  PourTrace& trace = result.trace;
  trace.sample_rate = sample_rate;
  trace.time_s.reserve(n);
  trace.liquid_height_mm.reserve(n);
  trace.air_column_mm.reserve(n);
  trace.weight_g.reserve(n);

  std::size_t out_of_band = 0;
  double cumvol_ml = 0.0;
  double prev_q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double q = profile.flow_rate_mls(t);
    if (!(q >= 0.0)) {
      throw std::invalid_argument("simulate_pour: negative flow rate at t = " +
                                  std::to_string(t));
    }
    if (i > 0) cumvol_ml += 0.5 * (prev_q + q) * dt;
    prev_q = q;

    const double height = profile.initial_liquid_height_mm + cumvol_ml * 1000.0 / area_mm2;
    if (height >= container.total_height_mm) {
      throw OverfillError(container.name, t);
    }
    const double air = container.total_height_mm - height;
    trace.time_s.push_back(t);
    trace.liquid_height_mm.push_back(height);
    trace.air_column_mm.push_back(air);
    trace.weight_g.push_back(cumvol_ml);  // water, 1 g/ml

    const double f = resonance_frequency(air, container);
    if (!in_observed_band(f)) ++out_of_band;

    const double sat = q / (q + 5.0);  // flow saturation, 0 at zero flow
    const double tone_amp = container.resonance_gain * sat;
    const double tone = std::sin(phase) + h2 * std::sin(2.0 * phase + ph2) +
                        h3 * std::sin(3.0 * phase + ph3);

    const double white = rng.normal();
    lp += alpha_lp * (white - lp);
    hp += alpha_hp * (lp - hp);
    const double turbulence = lp - hp;

    const double background = background_amp * rng.normal();
    result.waveform[i] = static_cast<float>(tone_amp * tone +
                                            kTurbulenceLevel * tone_amp * turbulence +
                                            background);

    phase += 2.0 * kPi * f * dt;
    if (phase > 2.0 * kPi) phase = std::fmod(phase, 2.0 * kPi);
  }
  result.out_of_band_fraction = n == 0 ? 0.0 : static_cast<double>(out_of_band) / n;
  return result;
}

// Trace files carry a decimated copy of the trace (default 250 Hz); the
// underlying signal is piecewise linear, so readers can interpolate without
// loss worth caring about. The exact final sample is always included.
inline void write_trace_csv(const std::string& path, const PourTrace& trace,
                            double output_rate_hz = 250.0) {
  if (trace.empty()) throw std::invalid_argument("write_trace_csv: empty trace");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "t,liquid_height_mm,air_column_mm,weight_g\n";
  char line[160];
  const double last = trace.time_s.back();
  const auto emit = [&](double t) {
    std::snprintf(line, sizeof(line), "%.6f,%.9g,%.9g,%.9g\n", t, trace.liquid_height_at(t),
                  trace.air_column_at(t), trace.weight_at(t));
    out << line;
  };
  std::size_t k = 0;
  for (; static_cast<double>(k) / output_rate_hz < last; ++k) {
    emit(static_cast<double>(k) / output_rate_hz);
  }
  emit(last);
  if (!out) throw std::runtime_error("short write to " + path);
}

inline PourTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,liquid_height_mm", 0) != 0) {
    throw std::runtime_error(path + ": missing trace header");
  }
  PourTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double t, h, a, w;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &t, &h, &a, &w) != 4) {
      throw std::runtime_error(path + ": malformed trace row '" + line + "'");
    }
    trace.time_s.push_back(t);
    trace.liquid_height_mm.push_back(h);
    trace.air_column_mm.push_back(a);
    trace.weight_g.push_back(w);
  }
  if (trace.size() < 2) throw std::runtime_error(path + ": trace has fewer than 2 rows");
  trace.sample_rate = static_cast<double>(trace.size() - 1) / trace.time_s.back();
  return trace;
}

}  // namespace pouring
