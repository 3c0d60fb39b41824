#pragma once

// Detection signature, 64 bits:
//   bits  0..31  side A: sub-bin k count in bits 3k..3k+2 (k = 0..8), side sum in bits 27..31
//   bits 32..63  side B, same layout
// Sub-bin k is window index k of the coincidence pipeline, k = 0 the newest
// 300-MHz sub-bin at the recording alignment.

#include <array>
#include <cstdint>
#include <utility>

#include "psgen/common/error.hpp"

namespace psgen::pso {

inline constexpr int kSubBins = 9;
inline constexpr int kSubBinsPerCoarse = 3;
inline constexpr unsigned kFieldMax = 7;
inline constexpr unsigned kSideSumMax = 31;

using SideCounts = std::array<unsigned, kSubBins>;

class Signature {
 public:
  constexpr Signature() = default;
  constexpr explicit Signature(std::uint64_t raw) : raw_(raw) {}

  /// Packs per-side sub-bin counts; counts above the 3-bit field saturate.
  static constexpr Signature from_counts(const SideCounts& a, const SideCounts& b) {
    return Signature(pack_side(a) | (static_cast<std::uint64_t>(pack_side(b)) << 32));
  }

  constexpr std::uint64_t raw() const { return raw_; }
  constexpr std::uint32_t side_word(int side) const { return static_cast<std::uint32_t>(raw_ >> (32 * side)); }

  constexpr unsigned count(int side, int k) const { return (side_word(side) >> (3 * k)) & 7u; }
  constexpr unsigned side_sum(int side) const { return side_word(side) >> 27; }

  /// Signature class [n, m] = (side A sum, side B sum).
  constexpr std::pair<unsigned, unsigned> klass() const { return {side_sum(0), side_sum(1)}; }

  constexpr bool is_zero() const { return raw_ == 0; }
  constexpr bool coincident() const { return side_sum(0) > 0 && side_sum(1) > 0; }

  /// Side sums equal the sums of their sub-bin fields.
  constexpr bool consistent() const {
    for (int s = 0; s < 2; ++s) {
      unsigned sum = 0;
      for (int k = 0; k < kSubBins; ++k) sum += count(s, k);
      if (sum != side_sum(s)) return false;
    }
    return true;
  }

  friend constexpr bool operator==(Signature, Signature) = default;

 private:
  static constexpr std::uint32_t pack_side(const SideCounts& c) {
    std::uint32_t w = 0;
    unsigned sum = 0;
    for (int k = 0; k < kSubBins; ++k) {
      const unsigned v = c[k] > kFieldMax ? kFieldMax : c[k];
      w |= v << (3 * k);
      sum += v;
    }
    if (sum > kSideSumMax) sum = kSideSumMax;
    return w | (sum << 27);
  }

  std::uint64_t raw_ = 0;
};

}  // namespace psgen::pso
