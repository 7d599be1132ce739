#pragma once

#include <complex>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pouring/binio.hpp"
#include "pouring/fft.hpp"

namespace pouring {

// Spectrogram front-end constants: 16 kHz input, 512-sample Hann window
// (0.032 s), hop 256 (0.016 s), 257 magnitude bins.
inline constexpr std::uint32_t kModelSampleRate = 16000;
inline constexpr std::uint32_t kStftWindow = 512;
inline constexpr std::uint32_t kStftHop = 256;
inline constexpr std::uint32_t kStftBins = kStftWindow / 2 + 1;

struct Spectrogram {
  std::uint32_t rows = 0;  // frequency bins
  std::uint32_t cols = 0;  // time frames
  std::uint32_t sample_rate = 0;
  std::uint32_t hop = 0;            // samples between frame centers
  std::vector<float> values;        // rows * cols, row-major (bin-major)

  float& at(std::uint32_t bin, std::uint32_t frame) { return values[bin * cols + frame]; }
  float at(std::uint32_t bin, std::uint32_t frame) const { return values[bin * cols + frame]; }

  double hop_seconds() const { return static_cast<double>(hop) / sample_rate; }
  double window_seconds() const { return static_cast<double>(2 * (rows - 1)) / sample_rate; }
  // Center time of a frame in seconds.
  double frame_time(std::uint32_t frame) const {
    return static_cast<double>(frame) * hop / sample_rate;
  }
  double bin_hz(std::uint32_t bin) const {
    return static_cast<double>(bin) * sample_rate / (2.0 * (rows - 1));
  }
};

// Periodic Hann window of length n.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

// Index into [0, n) mirrored without repeating the edge sample.
inline std::size_t reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  long m = i % period;
  if (m < 0) m += period;
  if (m >= n) m = period - m;
  return static_cast<std::size_t>(m);
}

// Magnitude STFT with centered frames: the waveform is reflect-padded by half
// a window on each side, frame j is centered on sample j*hop, and n samples
// give floor(n/hop)+1 frames. A 4 s clip at 16 kHz is exactly 257 x 251.
template <typename Sample>
Spectrogram stft_spectrogram(std::span<const Sample> wave,
                             std::uint32_t sample_rate = kModelSampleRate) {
  if (wave.empty()) {
    throw std::invalid_argument("stft: waveform must contain at least one sample");
  }
  const long n = static_cast<long>(wave.size());
  const long half = kStftWindow / 2;
  const std::uint32_t frames = static_cast<std::uint32_t>(wave.size() / kStftHop) + 1;

  static const std::vector<double> window = hann_window(kStftWindow);
  static const FftPlan plan(kStftWindow);

  Spectrogram spec;
  spec.rows = kStftBins;
  spec.cols = frames;
  spec.sample_rate = sample_rate;
  spec.hop = kStftHop;
  spec.values.resize(static_cast<std::size_t>(kStftBins) * frames);

  std::vector<std::complex<double>> buf(kStftWindow);
  for (std::uint32_t j = 0; j < frames; ++j) {
    const long center = static_cast<long>(j) * kStftHop;
    for (long k = 0; k < static_cast<long>(kStftWindow); ++k) {
      const long src = center - half + k;
      const double v = (src >= 0 && src < n)
                           ? static_cast<double>(wave[static_cast<std::size_t>(src)])
                           : static_cast<double>(wave[reflect_index(src, n)]);
      buf[static_cast<std::size_t>(k)] = v * window[static_cast<std::size_t>(k)];
    }
    plan.forward(buf);
    for (std::uint32_t b = 0; b < kStftBins; ++b) {
      spec.values[static_cast<std::size_t>(b) * frames + j] =
          static_cast<float>(std::abs(buf[b]));
    }
  }
  return spec;
}

inline void write_spectrogram(std::ostream& out, const Spectrogram& spec) {
  write_tag(out, "SPGM");
  write_u32le(out, 1);  // version
  write_u32le(out, spec.rows);
  write_u32le(out, spec.cols);
  write_u32le(out, spec.sample_rate);
  write_u32le(out, spec.hop);
  for (float v : spec.values) write_f32le(out, v);
}

inline void write_spectrogram(const std::string& path, const Spectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_spectrogram(out, spec);
}

inline Spectrogram read_spectrogram(std::istream& in) {
  expect_tag(in, "SPGM", "spectrogram");
  const std::uint32_t version = read_u32le(in);
  if (version != 1) {
    throw std::runtime_error("unsupported spectrogram version " + std::to_string(version));
  }
  Spectrogram spec;
  spec.rows = read_u32le(in);
  spec.cols = read_u32le(in);
  spec.sample_rate = read_u32le(in);
  spec.hop = read_u32le(in);
  spec.values.resize(static_cast<std::size_t>(spec.rows) * spec.cols);
  for (float& v : spec.values) v = read_f32le(in);
  return spec;
}

inline Spectrogram read_spectrogram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_spectrogram(in);
}

}  // namespace pouring
