#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pouring/rng.hpp"

namespace pouring {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Radix-2 decimation-in-time FFT. The plan precomputes the twiddle factors
// and the bit-reversal permutation so repeated transforms of one size (the
// STFT inner loop) stay cheap.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (!is_power_of_two(n_)) {
      throw std::invalid_argument("fft: size must be a power of two, got " + std::to_string(n));
    }
    twiddles_.resize(n_ / 2);
    for (std::size_t k = 0; k < n_ / 2; ++k) {
      const double angle = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n_);
      twiddles_[k] = std::complex<double>(std::cos(angle), std::sin(angle));
    }
    bitrev_.resize(n_);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n_) ++bits;
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) {
        r |= ((i >> b) & 1u) << (bits - 1 - b);
      }
      bitrev_[i] = static_cast<std::uint32_t>(r);
    }
  }

  std::size_t size() const { return n_; }

  void forward(std::span<std::complex<double>> buf) const {
    if (buf.size() != n_) {
      throw std::invalid_argument("fft: buffer size does not match plan size");
    }
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t j = bitrev_[i];
      if (j > i) std::swap(buf[i], buf[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t base = 0; base < n_; base += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const std::complex<double> w = twiddles_[k * stride];
          const std::complex<double> u = buf[base + k];
          const std::complex<double> v = buf[base + k + half] * w;
          buf[base + k] = u + v;
          buf[base + k + half] = u - v;
        }
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::uint32_t> bitrev_;
};

// One-shot helper for callers that transform a single buffer.
inline void fft_inplace(std::span<std::complex<double>> buf) {
  FftPlan(buf.size()).forward(buf);
}

}  // namespace pouring
