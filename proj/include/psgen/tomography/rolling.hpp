#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/tomography/dataset.hpp"

namespace psgen::tomography {

/// Which joint quadrature to follow: (x1+x2)/sqrt2 against theta1+theta2, or the differences.
enum class JointQuadrature { sum, difference };

struct RollingPoint {
  double phase = 0.0;     // mean joint phase of the window, in [0, 2 pi)
  double variance = 0.0;  // sample variance of the joint quadrature
};

/// Sliding-window variance of the joint quadrature with records sorted by joint phase.
inline std::vector<RollingPoint> rolling_variance(const std::vector<QuadratureSample>& records, JointQuadrature key,
                                                  std::size_t window = 500, std::size_t stride = 1) {
  if (window < 2) throw DomainError("window must be >= 2");
  if (window > records.size()) throw DomainError("window larger than the number of records");
  if (stride == 0) throw DomainError("stride must be >= 1");
  const double sgn = key == JointQuadrature::sum ? 1.0 : -1.0;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(records.size());
  for (const auto& r : records)
    pts.emplace_back(wrap_phase(r.theta1 + sgn * r.theta2), (r.x1 + sgn * r.x2) / std::numbers::sqrt2);
  std::sort(pts.begin(), pts.end());
  std::vector<RollingPoint> out;
  for (std::size_t start = 0; start + window <= pts.size(); start += stride) {
    double mean = 0.0, phase = 0.0;
    for (std::size_t i = start; i < start + window; ++i) {
      mean += pts[i].second;
      phase += pts[i].first;
    }
    mean /= window;
    double ss = 0.0;
    for (std::size_t i = start; i < start + window; ++i) ss += (pts[i].second - mean) * (pts[i].second - mean);
    out.push_back({phase / window, ss / (window - 1)});
  }
  return out;
}

/// 10 log10(max / min) of a rolling-variance curve.
inline double variance_range_db(const std::vector<RollingPoint>& curve) {
  if (curve.empty()) throw DomainError("empty curve");
  const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end(),
                                            [](const auto& a, const auto& b) { return a.variance < b.variance; });
  return 10.0 * std::log10(hi->variance / lo->variance);
}

}  // namespace psgen::tomography
