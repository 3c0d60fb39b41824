#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "psgen/common/error.hpp"

namespace psgen::homodyne {

inline constexpr int kAdcMin = -8192;
inline constexpr int kAdcMax = 8191;

/// Sawtooth phase ramp sampled on the 100-MHz timetag clock.
///
/// The ramp segment spans theta from 0 to 2 pi over (1 - reset_fraction) of
/// the period; the flyback retraces linearly back to 0 in the remainder.
struct PhaseDrive {
  double ramp_frequency_hz = 1e3;
  double sample_rate_hz = 1e8;
  double reset_fraction = 0.001;
  /// Timetag offset of the ramp start.
  std::int64_t start_offset = 0;

  static PhaseDrive side_a() { return {1e3, 1e8, 0.001, 0}; }
  static PhaseDrive side_b() { return {1e4, 1e8, 0.001, 0}; }

  void validate() const {
    if (!(reset_fraction > 0.0 && reset_fraction <= 0.01)) throw DomainError("reset_fraction must lie in (0, 0.01]");
    if (!(ramp_frequency_hz > 0.0 && sample_rate_hz > ramp_frequency_hz))
      throw DomainError("ramp frequency must be positive and below the sample rate");
  }

  double period_samples() const { return sample_rate_hz / ramp_frequency_hz; }
};

struct DriveReading {
  double theta = 0.0;
  int adc_code = kAdcMin;
  bool in_ramp = true;
};

/// ADC code linear in theta over [kAdcMin, kAdcMax].
inline int phase_to_code(double theta) {
  const double frac = theta / (2.0 * std::numbers::pi);
  const long code = std::lround(kAdcMin + frac * (kAdcMax - kAdcMin));
  return static_cast<int>(std::clamp<long>(code, kAdcMin, kAdcMax));
}

inline double code_to_phase(int code) {
  return 2.0 * std::numbers::pi * (code - kAdcMin) / static_cast<double>(kAdcMax - kAdcMin);
}

inline DriveReading phase_at(const PhaseDrive& drive, std::int64_t timetag) {
  const double period = drive.period_samples();
  double pos = std::fmod(static_cast<double>(timetag - drive.start_offset), period);
  if (pos < 0.0) pos += period;
  const double frac = pos / period;
  const double ramp = 1.0 - drive.reset_fraction;
  DriveReading out;
  if (frac < ramp) {
    out.theta = 2.0 * std::numbers::pi * frac / ramp;
    out.in_ramp = true;
  } else {
    out.theta = 2.0 * std::numbers::pi * (1.0 - (frac - ramp) / drive.reset_fraction);
    out.in_ramp = false;
  }
  out.adc_code = phase_to_code(out.theta);
  if (out.theta >= 2.0 * std::numbers::pi) out.theta = 0.0;
  return out;
}

}  // namespace psgen::homodyne
