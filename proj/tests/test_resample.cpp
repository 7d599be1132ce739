#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "pouring/resample.hpp"
#include "pouring/rng.hpp"

using namespace pouring;

namespace {

template <typename S>
std::vector<S> sine(double hz, double seconds, double rate, double amp = 0.5) {
  std::vector<S> out(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<S>(amp * std::sin(2.0 * kPi * hz * i / rate));
  }
  return out;
}

// Single-bin DFT magnitude, normalized so a full-scale sine at an exact bin
// frequency measures its amplitude. Brute force on purpose.
template <typename S>
double tone_amplitude(const std::vector<S>& x, std::size_t begin, std::size_t len, double hz,
                      double rate) {
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    const double angle = -2.0 * kPi * hz * static_cast<double>(i) / rate;
    acc += static_cast<double>(x[begin + i]) *
           std::complex<double>(std::cos(angle), std::sin(angle));
  }
  return 2.0 * std::abs(acc) / static_cast<double>(len);
}

}  // namespace

TEST_CASE("equal rates return the input unchanged", "[resample]") {
  const auto x = sine<float>(440.0, 0.1, 8000.0);
  const auto y = resample<float>(x, 8000, 8000);
  REQUIRE(y == x);
}

TEST_CASE("empty input resamples to empty output", "[resample]") {
  std::vector<float> empty;
  REQUIRE(resample<float>(empty, 44100, 16000).empty());
}

TEST_CASE("output length is round(n * to / from)", "[resample]") {
  std::vector<float> x(1000, 0.0f);
  REQUIRE(resample<float>(x, 44100, 16000).size() == 363);  // round(362.81...)
  REQUIRE(resample<float>(x, 16000, 44100).size() == 2756);  // round(2756.25)
}

TEST_CASE("a 1 kHz tone survives 44100 -> 16000 within one bin and 1%", "[resample]") {
  const auto in = sine<double>(1000.0, 1.4, 44100.0);
  const auto out = resample<double>(in, 44100, 16000);

  // Interior 1 s windows; both rates put 1 kHz on an exact DFT bin.
  const double a_in = tone_amplitude(in, 4410, 44100, 1000.0, 44100.0);
  const double a_out = tone_amplitude(out, 1600, 16000, 1000.0, 16000.0);
  REQUIRE(a_in == Catch::Approx(0.5).epsilon(1e-3));
  REQUIRE(a_out == Catch::Approx(a_in).epsilon(0.01));

  // The peak did not move: scan all integer-Hz bins for the maximum.
  double best_hz = 0.0, best_amp = 0.0;
  for (int hz = 1; hz < 8000; hz += 1) {
    const double a = tone_amplitude(out, 1600, 16000, hz, 16000.0);
    if (a > best_amp) {
      best_amp = a;
      best_hz = hz;
    }
  }
  REQUIRE(std::abs(best_hz - 1000.0) <= 1.0);
}

TEST_CASE("a 9 kHz tone is attenuated at least 40 dB by 44100 -> 16000", "[resample]") {
  const auto in = sine<double>(9000.0, 1.4, 44100.0);
  const auto out = resample<double>(in, 44100, 16000);
  // Energy would fold to 7 kHz; scan the whole band for any survivor.
  double worst = 0.0;
  for (int hz = 20; hz < 8000; hz += 5) {
    worst = std::max(worst, tone_amplitude(out, 1600, 16000, hz, 16000.0));
  }
  REQUIRE(worst < 0.5 * 0.01);  // >= 40 dB below the input amplitude
}

TEST_CASE("resampling is linear", "[resample]") {
  Rng rng(13);
  std::vector<double> x(3000);
  for (auto& v : x) v = rng.normal();

  // Scaling by a power of two commutes bit-exactly.
  std::vector<double> x2(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) x2[i] = 2.0 * x[i];
  const auto r = resample<double>(x, 44100, 16000);
  const auto r2 = resample<double>(x2, 44100, 16000);
  for (std::size_t i = 0; i < r.size(); ++i) REQUIRE(r2[i] == 2.0 * r[i]);

  // A general scalar commutes to rounding error.
  const double a = 1.37;
  std::vector<double> xa(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xa[i] = a * x[i];
  const auto ra = resample<double>(xa, 44100, 16000);
  for (std::size_t i = 0; i < r.size(); ++i) {
    REQUIRE(ra[i] == Catch::Approx(a * r[i]).margin(1e-9));
  }
}

TEST_CASE("invalid rates are rejected", "[resample]") {
  std::vector<float> x(100, 0.0f);
  REQUIRE_THROWS_AS(resample<float>(x, 0, 16000), std::invalid_argument);
  REQUIRE_THROWS_AS(resample<float>(x, 44100, 0), std::invalid_argument);
}
