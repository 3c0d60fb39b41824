#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace psgen::numeric {

inline double log_binomial(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  if (k == 0 || k == n) return 0.0;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double binomial(int n, int k) { return std::exp(log_binomial(n, k)); }

/// k * log(p) with the convention 0 * log(0) = 0.
inline double xlogy(int k, double p) {
  if (k == 0) return 0.0;
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  return k * std::log(p);
}

/// Binomial amplitude sqrt(C(k,n) (1-R)^(k-n) R^n); zero outside 0 <= n <= k.
inline double binomial_amplitude(int k, int n, double reflectivity) {
  if (n < 0 || n > k) return 0.0;
  const double log_sq = log_binomial(k, n) + xlogy(k - n, 1.0 - reflectivity) +
                        xlogy(n, reflectivity);
  return std::exp(0.5 * log_sq);
}

/// Fixed-order pairwise summation; the result depends only on the input order.
template <typename T>
T pairwise_sum(std::span<const T> values) {
  if (values.empty()) return T{};
  if (values.size() <= 8) {
    T acc{};
    for (const T& v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Golden-section search for the maximum of a unimodal function on [lo, hi].
template <typename F>
double golden_max(F&& f, double lo, double hi, double tol = 1e-9) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Bisection root of f on [lo, hi]; f(lo) and f(hi) must differ in sign.
template <typename F>
double bisect(F&& f, double lo, double hi, double tol = 1e-12) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace psgen::numeric
