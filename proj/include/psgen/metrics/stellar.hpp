#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include "psgen/common/error.hpp"
#include "psgen/common/numeric.hpp"
#include "psgen/fock/state.hpp"

namespace psgen::metrics {

inline constexpr double kRankOneThreshold = 0.25;
inline constexpr double kRankTwoThreshold = 0.532;

enum class RankClass { rank0plus, rank1plus, rank2plus };

inline const char* to_string(RankClass c) {
  switch (c) {
    case RankClass::rank0plus: return "rank0plus";
    case RankClass::rank1plus: return "rank1plus";
    case RankClass::rank2plus: return "rank2plus";
  }
  return "?";
}

struct WitnessResult {
  double fidelity_11 = 0.0;
  RankClass rank_class = RankClass::rank0plus;
};

/// Strictly above 0.25 certifies rank 1+, strictly above 0.532 rank 2+.
inline RankClass classify_fidelity(double f) {
  if (f > kRankTwoThreshold) return RankClass::rank2plus;
  if (f > kRankOneThreshold) return RankClass::rank1plus;
  return RankClass::rank0plus;
}

inline WitnessResult witness(const fock::TwoModeState& state) {
  if (state.cutoff() < 1) throw DomainError("witness needs cutoff >= 1");
  const double f = state.population(1, 1);
  return {f, classify_fidelity(f)};
}

/// <1,1| rho |1,1> for the (n,n)-subtracted state with equal loss eta on both modes.
inline double fock11_fidelity_closed(double lambda, double eta, int n) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw DomainError("lambda must lie in [0, 1)");
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0, 1]");
  const double l2 = lambda * lambda;
  const double x = l2 * (1.0 - eta) * (1.0 - eta);
  const double pre = eta * eta * l2;
  switch (n) {
    case 0:
      return pre * (1.0 - l2) * (1.0 + x) / std::pow(1.0 - x, 3);
    case 1:
      return 4.0 * pre * std::pow(1.0 - l2, 3) * (1.0 + 4.0 * x + x * x) /
             (std::pow(1.0 - x, 5) * (1.0 + l2));
    case 2:
      return 9.0 * pre * std::pow(1.0 - l2, 5) * (1.0 + 9.0 * x + 9.0 * x * x + x * x * x) /
             (std::pow(1.0 - x, 7) * (1.0 + 4.0 * l2 + l2 * l2));
    default:
      throw DomainError("closed form available for n in {0,1,2}");
  }
}

/// (argmax, max) of F_{n,n}(lambda, eta) over lambda in [0,1): grid, then golden section.
inline std::pair<double, double> max_over_lambda(int n, double eta, double grid_step = 1e-3) {
  auto f = [&](double l) { return fock11_fidelity_closed(l, eta, n); };
  double best_l = 0.0;
  double best_f = f(0.0);
  for (double l = grid_step; l < 1.0; l += grid_step) {
    const double v = f(l);
    if (v > best_f) {
      best_f = v;
      best_l = l;
    }
  }
  const double lo = std::max(0.0, best_l - grid_step);
  const double hi = std::min(1.0 - 1e-12, best_l + grid_step);
  const double l = numeric::golden_max(f, lo, hi, 1e-9);
  return {l, f(l)};
}

/// Smallest eta on a grid of the given step for which sup_lambda F_{n,n} exceeds the threshold.
inline double minimal_transmissivity(int n, double threshold = kRankOneThreshold, double step = 1e-3) {
  const int steps = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= steps; ++i) {
    const double eta = i * step;
    if (max_over_lambda(n, eta).second > threshold) return eta;
  }
  throw DomainError("threshold is not exceeded for any transmissivity");
}

/// The two lambda values where F_{n,n}(lambda, eta) crosses the threshold.
inline std::pair<double, double> threshold_crossings(int n, double eta, double threshold = kRankOneThreshold) {
  const auto [peak, fmax] = max_over_lambda(n, eta);
  if (!(fmax > threshold)) throw DomainError("fidelity never exceeds the threshold");
  auto g = [&](double l) { return fock11_fidelity_closed(l, eta, n) - threshold; };
  return {numeric::bisect(g, 0.0, peak), numeric::bisect(g, peak, 1.0 - 1e-12)};
}

/// Whitespace table "lambda eta F" on a regular grid, one row per point.
inline void write_contour_table(std::ostream& os, int n, int lambda_points = 101, int eta_points = 101) {
  os << "# F_" << n << n << "(lambda, eta) = <1,1|rho|1,1>\n# lambda eta F\n";
  os << std::setprecision(10);
  for (int j = 0; j < eta_points; ++j) {
    const double eta = eta_points == 1 ? 1.0 : static_cast<double>(j) / (eta_points - 1);
    for (int i = 0; i < lambda_points; ++i) {
      const double lambda = 0.99 * i / std::max(1, lambda_points - 1);
      os << lambda << ' ' << eta << ' ' << fock11_fidelity_closed(lambda, eta, n) << '\n';
    }
  }
}

}  // namespace psgen::metrics
