#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "pouring/rng.hpp"

namespace pouring {

namespace detail {

// Zeroth-order modified Bessel function of the first kind (power series).
inline double bessel_i0(double x) {
  const double half = 0.5 * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

inline double kaiser(double t, double beta) {  // t in [-1, 1]
  const double u = 1.0 - t * t;
  if (u < 0.0) return 0.0;
  return bessel_i0(beta * std::sqrt(u)) / bessel_i0(beta);
}

inline double sinc(double u) {
  if (std::abs(u) < 1e-12) return 1.0;
  const double p = kPi * u;
  return std::sin(p) / p;
}

}  // namespace detail

// Number of sinc zero crossings spanned by the interpolation kernel.
inline constexpr int kResampleTaps = 32;
inline constexpr double kResampleBeta = 8.0;      // Kaiser shape
inline constexpr double kResampleCutoff = 0.45;   // of the lower sample rate

// Band-limited rate conversion with a Kaiser-windowed sinc kernel. The
// anti-aliasing cutoff sits at 0.45 of the lower of the two rates, so
// content above the output Nyquist is suppressed rather than folded back.
// Output length is round(input_len * to_rate / from_rate).
template <typename Sample>
std::vector<Sample> resample(std::span<const Sample> in, std::uint32_t from_rate,
                             std::uint32_t to_rate) {
  if (from_rate == 0 || to_rate == 0) {
    throw std::invalid_argument("resample: sample rates must be positive");
  }
  if (in.empty()) return {};
  if (from_rate == to_rate) return std::vector<Sample>(in.begin(), in.end());

  const std::uint32_t g = std::gcd(from_rate, to_rate);
  const std::int64_t up = to_rate / g;     // L
  const std::int64_t down = from_rate / g; // M

  const double cutoff_hz = kResampleCutoff * static_cast<double>(std::min(from_rate, to_rate));
  const double bw = 2.0 * cutoff_hz / from_rate;  // kernel bandwidth, cycles per input sample
  const double halfspan = (kResampleTaps / 2) / bw;
  const long reach = static_cast<long>(std::ceil(halfspan));

  // Kernel weights for one fractional offset, normalized to unit DC gain.
  const auto make_weights = [&](double frac) {
    std::vector<double> w(static_cast<std::size_t>(2 * reach + 2));
    double sum = 0.0;
    for (long k = -reach; k <= reach + 1; ++k) {
      const double x = static_cast<double>(k) - frac;
      double v = 0.0;
      if (std::abs(x) <= halfspan) {
        v = bw * detail::sinc(bw * x) * detail::kaiser(x / halfspan, kResampleBeta);
      }
      w[static_cast<std::size_t>(k + reach)] = v;
      sum += v;
    }
    for (double& v : w) v /= sum;
    return w;
  };

  // The fractional source offset cycles with period `up`; precompute the
  // phase bank unless the ratio is pathologically irreducible.
  std::vector<std::vector<double>> phases;
  const bool tabulate = up <= 8192;
  if (tabulate) {
    phases.reserve(static_cast<std::size_t>(up));
    for (std::int64_t r = 0; r < up; ++r) {
      phases.push_back(make_weights(static_cast<double>(r) / static_cast<double>(up)));
    }
  }

  const std::int64_t n_in = static_cast<std::int64_t>(in.size());
  const std::int64_t n_out = static_cast<std::int64_t>(
      std::llround(static_cast<double>(in.size()) * to_rate / from_rate));

  std::vector<Sample> out(static_cast<std::size_t>(n_out));
  for (std::int64_t n = 0; n < n_out; ++n) {
    const std::int64_t num = n * down;
    const std::int64_t i0 = num / up;
    const std::int64_t rem = num % up;
    const std::vector<double>& w =
        tabulate ? phases[static_cast<std::size_t>(rem)]
                 : make_weights(static_cast<double>(rem) / static_cast<double>(up));
    double acc = 0.0;
    for (long k = -reach; k <= reach + 1; ++k) {
      const std::int64_t src = i0 + k;
      if (src < 0 || src >= n_in) continue;  // zero padding outside the signal
      acc += w[static_cast<std::size_t>(k + reach)] *
             static_cast<double>(in[static_cast<std::size_t>(src)]);
    }
    out[static_cast<std::size_t>(n)] = static_cast<Sample>(acc);
  }
  return out;
}

}  // namespace pouring
