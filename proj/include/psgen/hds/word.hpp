#pragma once

// Sample word layout (32 bits, little-endian on the wire):
//   bits 16..31  homodyne ADC sample, 14-bit two's complement sign-extended to 16 bits
//   bits  0..15  phase-drive ADC sample, same encoding
// The half-word 0x8000 is never produced by sign extension of a 14-bit value
// and marks a homodyne sample rejected by the slope check.

#include <cstdint>

namespace psgen::hds {

inline constexpr std::uint32_t kKeyword = 0x48445351;       // "HDSQ"
inline constexpr std::uint32_t kErrorKeyword = 0x48445345;  // "HDSE"
inline constexpr std::uint16_t kPlaceholder = 0x8000;

inline constexpr int kSampleMin = -8192;
inline constexpr int kSampleMax = 8191;

/// Sign-extends the low 14 bits of a raw ADC code to 16 bits.
constexpr std::uint16_t sign_extend14(std::uint16_t raw) {
  const std::uint16_t v = raw & 0x3fff;
  return (v & 0x2000) ? static_cast<std::uint16_t>(v | 0xc000) : v;
}

/// Encodes a signed sample in [-8192, 8191]; out-of-range values are clipped.
constexpr std::uint16_t encode_sample(int value) {
  if (value < kSampleMin) value = kSampleMin;
  if (value > kSampleMax) value = kSampleMax;
  return static_cast<std::uint16_t>(static_cast<std::int16_t>(value));
}

constexpr bool is_valid_half(std::uint16_t half) {
  const auto v = static_cast<std::int16_t>(half);
  return v >= kSampleMin && v <= kSampleMax;
}

constexpr std::uint32_t pack_word(std::uint16_t adc_a, std::uint16_t adc_b) {
  return (static_cast<std::uint32_t>(adc_a) << 16) | adc_b;
}

constexpr std::uint32_t make_word(int homodyne, int phase_drive) {
  return pack_word(encode_sample(homodyne), encode_sample(phase_drive));
}

constexpr std::uint16_t high_half(std::uint32_t w) { return static_cast<std::uint16_t>(w >> 16); }
constexpr std::uint16_t low_half(std::uint32_t w) { return static_cast<std::uint16_t>(w & 0xffff); }

constexpr int homodyne_sample(std::uint32_t w) { return static_cast<std::int16_t>(high_half(w)); }
constexpr int phase_sample(std::uint32_t w) { return static_cast<std::int16_t>(low_half(w)); }

constexpr bool is_placeholder(std::uint32_t w) { return high_half(w) == kPlaceholder; }

/// A word is producible by the ADC path iff both halves are valid sign-extended samples.
constexpr bool is_valid_word(std::uint32_t w) { return is_valid_half(high_half(w)) && is_valid_half(low_half(w)); }

}  // namespace psgen::hds
