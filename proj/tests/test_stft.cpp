#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "pouring/rng.hpp"
#include "pouring/stft.hpp"

using namespace pouring;

namespace {

std::vector<float> sine(double hz, double seconds, double rate, double amp = 0.5) {
  std::vector<float> out(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(amp * std::sin(2.0 * kPi * hz * i / rate));
  }
  return out;
}

// Frame magnitude computed straight from the definition (naive DFT of the
// Hann-windowed 512 samples centered on j*hop), for interior frames only.
std::vector<double> naive_frame_magnitudes(const std::vector<float>& wave, std::uint32_t j) {
  const auto window = hann_window(kStftWindow);
  const long center = static_cast<long>(j) * kStftHop;
  std::vector<double> mags(kStftBins);
  for (std::uint32_t b = 0; b < kStftBins; ++b) {
    double re = 0.0, im = 0.0;
    for (long k = 0; k < static_cast<long>(kStftWindow); ++k) {
      const long src = center - kStftWindow / 2 + k;
      REQUIRE(src >= 0);
      REQUIRE(src < static_cast<long>(wave.size()));
      const double v = wave[static_cast<std::size_t>(src)] * window[static_cast<std::size_t>(k)];
      const double angle = -2.0 * kPi * b * k / kStftWindow;
      re += v * std::cos(angle);
      im += v * std::sin(angle);
    }
    mags[b] = std::hypot(re, im);
  }
  return mags;
}

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

TEST_CASE("a 4 s clip at 16 kHz is exactly 257 x 251", "[stft]") {
  Rng rng(7);
  std::vector<float> wave(64000);
  for (auto& v : wave) v = static_cast<float>(rng.normal());

  const Spectrogram spec = stft_spectrogram<float>(wave);
  REQUIRE(spec.rows == 257);
  REQUIRE(spec.cols == 251);
  REQUIRE(spec.sample_rate == 16000);
  REQUIRE(spec.hop_seconds() == Catch::Approx(0.016));
  REQUIRE(spec.window_seconds() == Catch::Approx(0.032));

  // Bit-stable: recomputing gives identical values.
  const Spectrogram again = stft_spectrogram<float>(wave);
  REQUIRE(spec.values == again.values);
}

TEST_CASE("all-zero input gives an all-zero spectrogram", "[stft]") {
  std::vector<float> wave(16000, 0.0f);
  const Spectrogram spec = stft_spectrogram<float>(wave);
  for (float v : spec.values) REQUIRE(v == 0.0f);
}

TEST_CASE("all values are non-negative", "[stft]") {
  Rng rng(3);
  std::vector<float> wave(20000);
  for (auto& v : wave) v = static_cast<float>(rng.normal());
  const Spectrogram spec = stft_spectrogram<float>(wave);
  for (float v : spec.values) REQUIRE(v >= 0.0f);
}

TEST_CASE("a bin-centered sine peaks at its bin, against the naive oracle", "[stft]") {
  const std::uint32_t k = 40;  // 40 * 16000 / 512 = 1250 Hz
  const double hz = static_cast<double>(k) * 16000.0 / 512.0;
  const auto wave = sine(hz, 1.0, 16000.0);
  const Spectrogram spec = stft_spectrogram<float>(wave);

  for (std::uint32_t j = 2; j + 2 < spec.cols; j += 13) {
    std::vector<double> col(spec.rows);
    for (std::uint32_t b = 0; b < spec.rows; ++b) col[b] = spec.at(b, j);
    REQUIRE(argmax(col) == k);
    REQUIRE(argmax(naive_frame_magnitudes(wave, j)) == k);
    // Implementation against the definition, bin by bin.
    const auto oracle = naive_frame_magnitudes(wave, j);
    for (std::uint32_t b = 0; b < spec.rows; ++b) {
      REQUIRE(col[b] == Catch::Approx(oracle[b]).margin(1e-4));
    }
  }
}

TEST_CASE("concatenation only disturbs boundary frames", "[stft]") {
  Rng rng(9);
  std::vector<float> x(8 * kStftHop), y(6 * kStftHop);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  for (auto& v : y) v = static_cast<float>(rng.normal());
  std::vector<float> xy = x;
  xy.insert(xy.end(), y.begin(), y.end());

  const Spectrogram sx = stft_spectrogram<float>(x);
  const Spectrogram sy = stft_spectrogram<float>(y);
  const Spectrogram sxy = stft_spectrogram<float>(xy);

  const std::uint32_t fx = static_cast<std::uint32_t>(x.size() / kStftHop);  // 8
  // Interior frames of x: window fully inside x, no padding involved.
  for (std::uint32_t j = 1; j + 1 < fx; ++j) {
    for (std::uint32_t b = 0; b < sx.rows; ++b) {
      REQUIRE(sxy.at(b, j) == sx.at(b, j));
    }
  }
  // Interior frames of y appear shifted by fx frames.
  for (std::uint32_t j = 1; j + 1 < static_cast<std::uint32_t>(y.size() / kStftHop); ++j) {
    for (std::uint32_t b = 0; b < sy.rows; ++b) {
      REQUIRE(sxy.at(b, fx + j) == sy.at(b, j));
    }
  }
}

TEST_CASE("frame arithmetic for short inputs", "[stft]") {
  std::vector<float> one(1, 0.5f);
  const Spectrogram s1 = stft_spectrogram<float>(one);
  REQUIRE(s1.cols == 1);

  std::vector<float> some(700, 0.25f);
  REQUIRE(stft_spectrogram<float>(some).cols == 700 / kStftHop + 1);

  std::vector<float> empty;
  REQUIRE_THROWS_AS(stft_spectrogram<float>(empty), std::invalid_argument);
}

TEST_CASE("spectrogram serialization round-trips exactly", "[stft]") {
  Rng rng(21);
  std::vector<float> wave(9000);
  for (auto& v : wave) v = static_cast<float>(rng.normal());
  const Spectrogram spec = stft_spectrogram<float>(wave);

  std::stringstream buf;
  write_spectrogram(buf, spec);
  const Spectrogram back = read_spectrogram(buf);
  REQUIRE(back.rows == spec.rows);
  REQUIRE(back.cols == spec.cols);
  REQUIRE(back.sample_rate == spec.sample_rate);
  REQUIRE(back.hop == spec.hop);
  REQUIRE(back.values == spec.values);

  std::stringstream bad("not a spectrogram");
  REQUIRE_THROWS(read_spectrogram(bad));
}
