#pragma once

#include <stdexcept>
#include <string>

#include "pouring/container.hpp"

namespace pouring {

inline constexpr double kSpeedOfSoundMmPerS = 343000.0;
inline constexpr double kEndCorrectionFactor = 0.3;  // of the inner diameter

// Frequency band in which the rising air-column resonance is observed in
// real pouring recordings. Frequencies outside it are still returned but
// callers are expected to report them (see simulate_pour).
inline constexpr double kObservedBandLowHz = 256.0;
inline constexpr double kObservedBandHighHz = 2048.0;

inline bool in_observed_band(double hz) {
  return hz >= kObservedBandLowHz && hz <= kObservedBandHighHz;
}

// Fundamental of the air column above the liquid, modeled as a quarter-wave
// closed pipe with the standard open-end correction: f = c / (4 (L + 0.3 d)).
// Strictly decreasing in the air-column length.
inline double resonance_frequency(double air_column_mm, const ContainerSpec& container) {
  if (!(air_column_mm > 0.0) || air_column_mm > container.total_height_mm) {
    throw std::domain_error("resonance_frequency: air column " +
                            std::to_string(air_column_mm) + " mm outside (0, " +
                            std::to_string(container.total_height_mm) + "] for container '" +
                            container.name + "'");
  }
  const double effective_mm =
      air_column_mm + kEndCorrectionFactor * container.inner_diameter_mm;
  return kSpeedOfSoundMmPerS / (4.0 * effective_mm);
}

}  // namespace pouring
