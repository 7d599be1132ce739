#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pouring/pour_sim.hpp"
#include "pouring/resample.hpp"
#include "pouring/rng.hpp"
#include "pouring/stft.hpp"
#include "pouring/wav.hpp"

namespace pouring {

inline constexpr double kClipSeconds = 4.0;
// 4 s at 16 kHz through the centered STFT: 64000/256 + 1 frames.
inline constexpr std::uint32_t kClipFrames = 251;
inline constexpr std::size_t kClipSamples16k = 64000;

// One dataset record. Failed pours carry an error string instead of paths.
struct ManifestEntry {
  std::string trace_id;
  std::string wav_path;
  std::string trace_path;
  std::string container_name;
  std::string error;
};

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& e : entries) {
    nlohmann::json line;
    line["trace_id"] = e.trace_id;
    if (e.error.empty()) {
      line["wav_path"] = e.wav_path;
      line["trace_path"] = e.trace_path;
      line["container_name"] = e.container_name;
    } else {
      line["error"] = e.error;
    }
    out << line.dump() << "\n";
  }
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json doc = nlohmann::json::parse(line);
    ManifestEntry e;
    e.trace_id = doc.at("trace_id").get<std::string>();
    if (doc.contains("error")) {
      e.error = doc.at("error").get<std::string>();
    } else {
      e.wav_path = doc.at("wav_path").get<std::string>();
      e.trace_path = doc.at("trace_path").get<std::string>();
      e.container_name = doc.at("container_name").get<std::string>();
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

// One pour loaded for training/evaluation: audio brought to the model rate
// plus the ground-truth trace.
struct PourRecord {
  std::string trace_id;
  std::string container_name;
  std::vector<float> wave16k;
  PourTrace trace;
  double duration_s = 0.0;
};

inline PourRecord load_pour(const ManifestEntry& entry, const std::string& base_dir) {
  if (!entry.error.empty()) {
    throw std::invalid_argument("pour " + entry.trace_id + " failed at synthesis: " + entry.error);
  }
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (std::filesystem::path(base_dir) / fp).string();
  };
  PourRecord rec;
  rec.trace_id = entry.trace_id;
  rec.container_name = entry.container_name;
  const WavData wav = read_wav(resolve(entry.wav_path));
  rec.wave16k = resample<float>(wav.samples, wav.sample_rate, kModelSampleRate);
  rec.trace = read_trace_csv(resolve(entry.trace_path));
  rec.duration_s = static_cast<double>(rec.wave16k.size()) / kModelSampleRate;
  return rec;
}

// Loads every successful pour of a dataset directory (manifest.jsonl inside).
inline std::vector<PourRecord> load_dataset(const std::string& dir) {
  const auto entries = read_manifest((std::filesystem::path(dir) / "manifest.jsonl").string());
  std::vector<PourRecord> pours;
  for (const auto& e : entries) {
    if (!e.error.empty()) continue;
    pours.push_back(load_pour(e, dir));
  }
  if (pours.empty()) throw std::runtime_error(dir + ": dataset has no usable pours");
  return pours;
}

// A 4 s training window into one pour: where it starts and the per-frame
// air-column labels (which only decrease while water rises).
struct ClipSample {
  std::size_t pour_index = 0;
  std::string trace_id;
  double clip_start_s = 0.0;
  std::vector<float> labels_mm;  // kClipFrames values
};

// Random 4 s clips from one recording: round(duration * count_per_second)
// of them, uniformly placed. Frame j's label is the trace's air column at
// clip_start + j * hop (the frame's center time). Recordings shorter than
// the clip length are refused rather than padded.
inline std::vector<ClipSample> sample_clips(const PourTrace& trace, double duration_s,
                                            double count_per_second, std::uint64_t seed,
                                            std::size_t pour_index = 0,
                                            const std::string& trace_id = {}) {
  if (duration_s < kClipSeconds) {
    throw std::invalid_argument("sample_clips: recording of " + std::to_string(duration_s) +
                                " s is shorter than the " + std::to_string(kClipSeconds) +
                                " s clip length");
  }
  const auto count = static_cast<std::size_t>(std::llround(duration_s * count_per_second));
  Rng rng(seed);
  std::vector<ClipSample> clips;
  clips.reserve(count);
  const double hop_s = static_cast<double>(kStftHop) / kModelSampleRate;
  for (std::size_t k = 0; k < count; ++k) {
    ClipSample clip;
    clip.pour_index = pour_index;
    clip.trace_id = trace_id;
    clip.clip_start_s = rng.uniform(0.0, duration_s - kClipSeconds);
    clip.labels_mm.resize(kClipFrames);
    for (std::uint32_t j = 0; j < kClipFrames; ++j) {
      clip.labels_mm[j] =
          static_cast<float>(trace.air_column_at(clip.clip_start_s + j * hop_s));
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

// Magnitude spectrogram of one clip (exactly kClipFrames frames).
inline Spectrogram clip_spectrogram(const std::vector<float>& wave16k, double clip_start_s) {
  if (wave16k.size() < kClipSamples16k) {
    throw std::invalid_argument("clip_spectrogram: recording shorter than one clip");
  }
  auto start = static_cast<std::size_t>(std::llround(clip_start_s * kModelSampleRate));
  start = std::min(start, wave16k.size() - kClipSamples16k);
  const std::span<const float> window(wave16k.data() + start, kClipSamples16k);
  return stft_spectrogram<float>(window);
}

}  // namespace pouring
