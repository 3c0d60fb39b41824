#pragma once

#include <optional>

#include "psgen/pso/signature.hpp"

namespace psgen::pso {

/// Weighted-average sub-bin of the combined (A + B) counts without dividing.
///
/// The numerator sum_k k c_k is compared against the multiplied denominators
/// j * sum_k c_k for j = 1..8; the result is the number of thresholds the
/// numerator reaches, i.e. floor(numerator / total); a numerator exactly on
/// threshold j gives bin j. Empty windows give nullopt.
inline std::optional<int> weighted_average_subbin(const SideCounts& a, const SideCounts& b) {
  unsigned total = 0, numerator = 0;
  for (int k = 0; k < kSubBins; ++k) {
    const unsigned c = a[k] + b[k];
    total += c;
    numerator += static_cast<unsigned>(k) * c;
  }
  if (total == 0) return std::nullopt;
  // Multiplied denominators, as the pipeline keeps copies of the sum times each bin number.
  unsigned scaled[kSubBins];
  scaled[0] = 0;
  for (int j = 1; j < kSubBins; ++j) scaled[j] = scaled[j - 1] + total;
  int bin = 0;
  for (int j = 1; j < kSubBins; ++j) bin += numerator >= scaled[j];
  return bin;
}

inline bool centroid_records(int bin) { return bin >= 4 && bin <= 6; }

}  // namespace psgen::pso
