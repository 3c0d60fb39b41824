#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <tuple>
#include <vector>

#include "psgen/common/error.hpp"

namespace psgen::tomography {

/// One joint homodyne outcome: quadratures in vacuum-variance-1/2 units and LO phases.
struct QuadratureSample {
  double x1 = 0.0;
  double x2 = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  /// Frequency of the outcome; acquisition always records 1.
  double weight = 1.0;

  friend bool operator==(const QuadratureSample&, const QuadratureSample&) = default;
};

inline double wrap_phase(double theta) {
  const double two_pi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta, two_pi);
  if (t < 0.0) t += two_pi;
  return t >= two_pi ? 0.0 : t;
}

/// Records for one reconstruction, held in a canonical order.
///
/// Sorting by the bit patterns of the fields makes every downstream sum
/// independent of the order in which samples were acquired.
class TomographyDataset {
 public:
  TomographyDataset(int n_c, std::vector<QuadratureSample> records) : n_c_(n_c), records_(std::move(records)) {
    if (n_c_ < 0) throw DomainError("cutoff must be >= 0");
    for (auto& r : records_) {
      if (!std::isfinite(r.x1) || !std::isfinite(r.x2) || !std::isfinite(r.theta1) || !std::isfinite(r.theta2))
        throw DomainError("dataset contains a non-finite value");
      if (!(r.weight > 0.0)) throw DomainError("record weights must be positive");
      r.theta1 = wrap_phase(r.theta1);
      r.theta2 = wrap_phase(r.theta2);
    }
    auto key = [](const QuadratureSample& r) {
      return std::tuple{std::bit_cast<std::uint64_t>(r.x1), std::bit_cast<std::uint64_t>(r.x2),
                        std::bit_cast<std::uint64_t>(r.theta1), std::bit_cast<std::uint64_t>(r.theta2),
                        std::bit_cast<std::uint64_t>(r.weight)};
    };
    std::sort(records_.begin(), records_.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  }

  int cutoff() const { return n_c_; }
  int dim() const { return (n_c_ + 1) * (n_c_ + 1); }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<QuadratureSample>& records() const { return records_; }

  double total_weight() const {
    double w = 0.0;
    for (const auto& r : records_) w += r.weight;
    return w;
  }

  /// Fewer records than D^2 leaves the reconstruction poorly constrained.
  bool undersized() const { return size() < static_cast<std::size_t>(dim()) * dim(); }

 private:
  int n_c_;
  std::vector<QuadratureSample> records_;
};

}  // namespace psgen::tomography
