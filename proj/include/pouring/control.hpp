#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pouring/backprop.hpp"
#include "pouring/dataset.hpp"
#include "pouring/model.hpp"
#include "pouring/pour_sim.hpp"
#include "pouring/resample.hpp"
#include "pouring/train.hpp"

namespace pouring {

struct ControlConfig {
  double actuator_delay_s = 0.1;  // stop command takes effect this much later
  double warmup_s = 1.0;          // decisions suppressed at the start
  std::uint32_t synth_rate = 44100;
};

struct PourEpisodeResult {
  double target_air_column_mm = 0.0;
  double achieved_air_column_mm = 0.0;  // ground truth at stop + actuator delay
  double stop_time_s = 0.0;             // decision time (episode end on timeout)
  double overshoot_mm = 0.0;            // target - achieved; positive = overfilled
  bool timed_out = false;
  std::vector<double> prediction_times_s;
  std::vector<double> per_frame_predictions_mm;
  std::vector<double> loop_latency_ms;
  std::vector<double> spectrogram_latency_ms;
};

struct LatencySummary {
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  double spectrogram_share = 0.0;  // fraction of loop time spent on spectrograms
};

inline LatencySummary measure_loop_latency(const PourEpisodeResult& result) {
  if (result.loop_latency_ms.empty()) {
    throw std::invalid_argument("measure_loop_latency: empty latency series");
  }
  LatencySummary s;
  std::vector<double> sorted = result.loop_latency_ms;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) {
    total += v;
    s.max_ms = std::max(s.max_ms, v);
  }
  s.mean_ms = total / static_cast<double>(sorted.size());
  s.p95_ms = sorted[std::min(sorted.size() - 1,
                             static_cast<std::size_t>(0.95 * static_cast<double>(sorted.size())))];
  double spec_total = 0.0;
  for (double v : result.spectrogram_latency_ms) spec_total += v;
  s.spectrogram_share = total > 0.0 ? spec_total / total : 0.0;
  return s;
}

// Closed-loop pouring against the simulator. Every hop (16 ms of simulated
// audio) the controller assembles the latest 4 s window (zero-prefixed before
// 4 s have elapsed), asks the predictor for the current air-column length,
// and commands a stop the first time the estimate reaches the target. The
// flow actually stops one actuator delay later; the achieved value is read
// from the simulator trace at that instant, never from the predictor.
//
// The decision path sees audio only. Audio after the stop instant never
// influences the decision, so the unstopped synthesis is valid for the whole
// episode.
//
// Predictor signature:
//   double(std::span<const float> window16k, double now_s, double& spec_ms)
template <typename Predictor>
PourEpisodeResult run_closed_loop_with(Predictor&& predict, const ContainerSpec& container,
                                       const PourProfile& profile, double target_mm,
                                       std::uint64_t seed, const ControlConfig& cfg = {}) {
  if (!(target_mm > 0.0) || target_mm >= container.total_height_mm) {
    throw std::invalid_argument("run_closed_loop: target air column outside (0, total_height)");
  }
  const SimulatedPour pour = simulate_pour(container, profile, cfg.synth_rate, seed);
  const std::vector<float> wave16 = resample<float>(pour.waveform, cfg.synth_rate,
                                                    kModelSampleRate);

  PourEpisodeResult result;
  result.target_air_column_mm = target_mm;

  const double hop_s = static_cast<double>(kStftHop) / kModelSampleRate;
  std::vector<float> window(kClipSamples16k);
  bool stopped = false;
  for (std::size_t k = 1;; ++k) {
    const double now = static_cast<double>(k) * hop_s;
    const std::size_t have = static_cast<std::size_t>(std::llround(now * kModelSampleRate));
    if (have > wave16.size()) break;

    const auto t0 = std::chrono::steady_clock::now();
    std::fill(window.begin(), window.end(), 0.0f);
    const std::size_t take = std::min(have, window.size());
    std::copy(wave16.begin() + static_cast<std::ptrdiff_t>(have - take),
              wave16.begin() + static_cast<std::ptrdiff_t>(have),
              window.end() - static_cast<std::ptrdiff_t>(take));
    double spec_ms = 0.0;
    const double estimate_mm = predict(std::span<const float>(window), now, spec_ms);
    const double loop_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    result.prediction_times_s.push_back(now);
    result.per_frame_predictions_mm.push_back(estimate_mm);
    result.loop_latency_ms.push_back(loop_ms);
    result.spectrogram_latency_ms.push_back(spec_ms);

    if (now >= cfg.warmup_s && estimate_mm <= target_mm) {
      result.stop_time_s = now;
      stopped = true;
      break;
    }
  }

  const double duration = pour.trace.duration();
  if (!stopped) {
    result.timed_out = true;
    result.stop_time_s = duration;
    result.achieved_air_column_mm = pour.trace.air_column_mm.back();
  } else {
    const double effective = std::min(result.stop_time_s + cfg.actuator_delay_s, duration);
    result.achieved_air_column_mm = pour.trace.air_column_at(effective);
  }
  result.overshoot_mm = result.target_air_column_mm - result.achieved_air_column_mm;
  return result;
}

// The production controller: sliding-window spectrogram + trained model, the
// last frame's estimate is the feedback signal. Recurrent state is not
// carried across windows; each decision re-reads the full 4 s buffer the
// model was trained on.
inline PourEpisodeResult run_closed_loop(const Model<float>& model,
                                         const ContainerSpec& container,
                                         const PourProfile& profile, double target_mm,
                                         std::uint64_t seed, const ControlConfig& cfg = {}) {
  model.head_bn.require_trained("run_closed_loop");
  const Normalization norm = model.norm;
  const auto predict = [&model, &norm](std::span<const float> window16k, double,
                                       double& spec_ms) {
    const auto t0 = std::chrono::steady_clock::now();
    const Spectrogram spec = stft_spectrogram<float>(window16k);
    const MatrixX<float> X = clip_matrix(spec, norm);
    spec_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const VectorX<float> pred = predict_frames(model, X);
    return static_cast<double>(pred(pred.size() - 1)) * norm.label_scale_mm;
  };
  return run_closed_loop_with(predict, container, profile, target_mm, seed, cfg);
}

// Reference controller fed the ground-truth air column instead of the model;
// its overshoot is exactly the flow integral over the actuator delay, which
// makes it a closed-form regression anchor.
inline PourEpisodeResult run_closed_loop_oracle(const ContainerSpec& container,
                                                const PourProfile& profile, double target_mm,
                                                std::uint64_t seed,
                                                const ControlConfig& cfg = {}) {
  // The oracle needs the trace of the same seeded episode; simulate once here
  // and close over it (run_closed_loop_with re-simulates identically).
  const SimulatedPour pour = simulate_pour(container, profile, cfg.synth_rate, seed);
  const auto predict = [&pour](std::span<const float>, double now, double& spec_ms) {
    spec_ms = 0.0;
    return pour.trace.air_column_at(now);
  };
  return run_closed_loop_with(predict, container, profile, target_mm, seed, cfg);
}

// Episode export: one JSON object per line. Loop latencies are wall-clock
// measurements and deliberately live in a separate file so the episode file
// stays byte-deterministic for a fixed seed.
inline void write_episodes_jsonl(const std::string& path,
                                 const std::vector<PourEpisodeResult>& episodes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& e : episodes) {
    nlohmann::json doc;
    doc["target_air_column_mm"] = e.target_air_column_mm;
    doc["achieved_air_column_mm"] = e.achieved_air_column_mm;
    doc["stop_time_s"] = e.stop_time_s;
    doc["overshoot_mm"] = e.overshoot_mm;
    doc["timed_out"] = e.timed_out;
    doc["prediction_times_s"] = e.prediction_times_s;
    doc["per_frame_predictions_mm"] = e.per_frame_predictions_mm;
    out << doc.dump() << "\n";
  }
}

inline void write_latencies_jsonl(const std::string& path,
                                  const std::vector<PourEpisodeResult>& episodes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& e : episodes) {
    nlohmann::json doc;
    doc["loop_latency_ms"] = e.loop_latency_ms;
    doc["spectrogram_latency_ms"] = e.spectrogram_latency_ms;
    if (!e.loop_latency_ms.empty()) {
      const LatencySummary s = measure_loop_latency(e);
      doc["mean_ms"] = s.mean_ms;
      doc["p95_ms"] = s.p95_ms;
      doc["max_ms"] = s.max_ms;
      doc["spectrogram_share"] = s.spectrogram_share;
    }
    out << doc.dump() << "\n";
  }
}

}  // namespace pouring
