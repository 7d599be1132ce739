#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pouring/binio.hpp"

namespace pouring {

struct WavData {
  std::vector<float> samples;  // mono, in [-1, 1]
  std::uint32_t sample_rate = 0;
};

// Writes mono 16-bit PCM little-endian. Samples are clamped to [-1, 1].
inline void write_wav(const std::string& path, std::span<const float> samples,
                      std::uint32_t sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  write_tag(out, "RIFF");
  write_u32le(out, 36 + data_bytes);
  write_tag(out, "WAVE");
  write_tag(out, "fmt ");
  write_u32le(out, 16);
  write_u16le(out, 1);  // PCM
  write_u16le(out, 1);  // mono
  write_u32le(out, sample_rate);
  write_u32le(out, sample_rate * 2);  // byte rate
  write_u16le(out, 2);                // block align
  write_u16le(out, 16);               // bits per sample
  write_tag(out, "data");
  write_u32le(out, data_bytes);
  for (float s : samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    const long q = std::lround(c * 32767.0f);
    write_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

// Reads mono 16-bit PCM. Unknown chunks are skipped.
inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  expect_tag(in, "RIFF", "wav");
  (void)read_u32le(in);
  expect_tag(in, "WAVE", "wav");

  WavData wav;
  std::uint16_t format = 0, channels = 0, bits = 0;
  bool have_fmt = false;
  while (true) {
    char id[4];
    in.read(id, 4);
    if (!in) break;
    const std::uint32_t size = read_u32le(in);
    const std::string chunk(id, 4);
    if (chunk == "fmt ") {
      format = read_u16le(in);
      channels = read_u16le(in);
      wav.sample_rate = read_u32le(in);
      (void)read_u32le(in);
      (void)read_u16le(in);
      bits = read_u16le(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (chunk == "data") {
      if (!have_fmt) throw std::runtime_error(path + ": data chunk before fmt");
      if (format != 1 || bits != 16) {
        throw std::runtime_error(path + ": only 16-bit PCM is supported");
      }
      if (channels != 1) {
        throw std::runtime_error(path + ": only mono files are supported");
      }
      const std::uint32_t count = size / 2;
      wav.samples.resize(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16le(in));
        wav.samples[i] = static_cast<float>(raw) / 32767.0f;
      }
      return wav;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);  // chunks are word-aligned
    }
  }
  throw std::runtime_error(path + ": no data chunk found");
}

}  // namespace pouring
