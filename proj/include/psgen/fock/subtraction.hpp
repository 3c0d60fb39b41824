#pragma once

#include <cmath>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/common/numeric.hpp"
#include "psgen/fock/model.hpp"
#include "psgen/fock/state.hpp"

namespace psgen::fock {

/// Discarded probability above which a truncated state is flagged.
inline constexpr double kTruncationWarnThreshold = 1e-3;

/// A state built on a truncated basis together with the weight that fell outside it.
struct TruncatedState {
  TwoModeState state;
  double discarded_weight = 0.0;
  bool truncation_warning = false;
};

namespace detail {

/// log |c_{k,n,m}|, i.e. half the log of the squared coefficient.
inline double log_abs_coefficient(int k, const SubtractionModel& model) {
  const double t = model.t_r();
  const int n = model.n_sub;
  const int m = model.m_sub;
  const double log_sq = numeric::xlogy(2 * k, t) + numeric::log_binomial(k, n) +
                        numeric::log_binomial(k, m) + numeric::xlogy(k - n, 1.0 - model.R1) +
                        numeric::xlogy(n, model.R1) + numeric::xlogy(k - m, 1.0 - model.R2) +
                        numeric::xlogy(m, model.R2);
  return 0.5 * log_sq;
}

inline void require_convergent(const SubtractionModel& model) {
  model.validate();
  if (!(model.lambda() < 1.0)) throw DivergenceError("effective squeezing lambda >= 1: series diverges");
}

/// Ratio c_{k+1}^2 / c_k^2 for k >= max(n,m).
inline double term_ratio(int k, const SubtractionModel& model) {
  const double l2 = model.lambda() * model.lambda();
  const double kp = k + 1.0;
  return l2 * kp * kp / ((kp - model.n_sub) * (kp - model.m_sub));
}

/// Smallest k_end such that sum_{k >= k_end} c_k^2 < rel_tol * sum_{k < k_end} c_k^2,
/// and both kets k_end - 1 - n and k_end - 1 - m exceed min_span.
inline int series_end(const SubtractionModel& model, double rel_tol, int min_span, double* partial_out) {
  const int k0 = model.k_min();
  double partial = 0.0;
  for (int k = k0; k < k0 + 200000; ++k) {
    const double term = std::exp(2.0 * log_abs_coefficient(k, model));
    partial += term;
    const double q = term_ratio(k, model);
    const bool tail_small = q < 1.0 && term * q / (1.0 - q) <= rel_tol * partial;
    if (tail_small && (k - k0) > min_span) {
      if (partial_out) *partial_out = partial;
      return k + 1;
    }
  }
  throw CutoffError("normalization series did not converge within the iteration cap");
}

}  // namespace detail

/// Signed coefficient c_{k,n,m} = (-t_r)^k B_{k,n}(R1) B_{k,m}(R2); zero for k < max(n,m).
inline double subtraction_coefficient(int k, const SubtractionModel& model) {
  if (k < 0) throw DomainError("k must be >= 0");
  if (k < model.k_min()) return 0.0;
  const double t = model.t_r();
  const double magnitude = std::pow(t, k) * numeric::binomial_amplitude(k, model.n_sub, model.R1) *
                           numeric::binomial_amplitude(k, model.m_sub, model.R2);
  return (k % 2 == 0) ? magnitude : -magnitude;
}

/// C^2_{n,m} = sum_k c_{k,n,m}^2 by direct summation with a geometric tail bound.
inline double normalization_sq_series(const SubtractionModel& model, double rel_tol = 1e-16) {
  detail::require_convergent(model);
  double partial = 0.0;
  detail::series_end(model, rel_tol, 0, &partial);
  return partial;
}

/// C^2_{n,m}; closed forms for (0,0) and (1,1) with R1 == R2, the series otherwise.
inline double normalization_sq(const SubtractionModel& model) {
  detail::require_convergent(model);
  const bool symmetric = model.R1 == model.R2;
  const double t2 = model.t_r() * model.t_r();
  const double rs = model.R1;
  const double g = t2 * (1.0 - rs) * (1.0 - rs);
  if (symmetric && model.n_sub == 0 && model.m_sub == 0) return 1.0 / (1.0 - g);
  if (symmetric && model.n_sub == 1 && model.m_sub == 1)
    return t2 * rs * rs * (1.0 + g) / std::pow(1.0 - g, 3);
  return normalization_sq_series(model);
}

/// p_{n,m} = (1 - t_r^2) C^2_{n,m}.
inline double success_probability(const SubtractionModel& model) {
  const double t = model.t_r();
  return (1.0 - t * t) * normalization_sq(model);
}

namespace detail {

inline void require_nonzero_norm(const SubtractionModel& model, double norm_sq) {
  if (!(norm_sq > 0.0))
    throw ZeroProbabilityError("subtraction outcome has zero probability: " + model.describe());
}

}  // namespace detail

/// Normalized |Psi_{n,m}> (as a density matrix) on the basis with per-mode cutoff n_c.
inline TruncatedState pure_subtracted_state(const SubtractionModel& model, int n_c) {
  detail::require_convergent(model);
  if (!model.is_lossless()) throw DomainError("pure_subtracted_state requires eta1 = eta2 = 1");
  if (n_c < 0) throw DomainError("cutoff must be >= 0");
  const double norm_sq = normalization_sq(model);
  detail::require_nonzero_norm(model, norm_sq);

  const int d = n_c + 1;
  Vector psi = Vector::Zero(d * d);
  double kept = 0.0;
  const int k_hi = n_c + std::min(model.n_sub, model.m_sub);
  for (int k = model.k_min(); k <= k_hi; ++k) {
    const double c = subtraction_coefficient(k, model);
    psi((k - model.n_sub) * d + (k - model.m_sub)) = c;
    kept += c * c;
  }
  detail::require_nonzero_norm(model, kept);
  TruncatedState out{TwoModeState::pure(n_c, psi), std::max(0.0, 1.0 - kept / norm_sq), false};
  out.truncation_warning = out.discarded_weight > kTruncationWarnThreshold;
  return out;
}

/// Photon-subtracted state followed by per-mode loss channels, on cutoff n_c.
///
/// Evaluates the environment-traced quadruple sum directly; only matrix
/// elements whose kets lie inside the truncated basis are kept and the
/// result is renormalized by its trace.
inline TruncatedState lossy_subtracted_state(const SubtractionModel& model, int n_c) {
  detail::require_convergent(model);
  if (n_c < 0) throw DomainError("cutoff must be >= 0");
  const double norm_sq = normalization_sq(model);
  detail::require_nonzero_norm(model, norm_sq);

  const int n = model.n_sub;
  const int m = model.m_sub;
  const int k0 = model.k_min();
  const int k_end = detail::series_end(model, 1e-16, n_c + 4, nullptr);
  const int d = n_c + 1;

  std::vector<double> amp(k_end, 0.0);
  for (int k = k0; k < k_end; ++k) amp[k] = subtraction_coefficient(k, model);

  // loss[j][h] = B_{j,h}(1 - eta); only h >= j - n_c is ever used.
  auto loss_table = [&](double eta, int offset) {
    std::vector<std::vector<double>> table(k_end);
    for (int k = k0; k < k_end; ++k) {
      const int j = k - offset;
      table[k].assign(j + 1, 0.0);
      for (int h = std::max(0, j - n_c); h <= j; ++h) table[k][h] = numeric::binomial_amplitude(j, h, 1.0 - eta);
    }
    return table;
  };
  const auto loss1 = loss_table(model.eta1, n);
  const auto loss2 = loss_table(model.eta2, m);

  Matrix rho = Matrix::Zero(d * d, d * d);
  for (int k = k0; k < k_end; ++k) {
    for (int kp = k0; kp < k_end; ++kp) {
      const double ck = amp[k] * amp[kp];
      if (ck == 0.0) continue;
      const int kmin = std::min(k, kp);
      const int kmax = std::max(k, kp);
      const int h_lo = std::max(0, kmax - n - n_c);
      const int l_lo = std::max(0, kmax - m - n_c);
      for (int h = h_lo; h <= kmin - n; ++h) {
        const double wh = loss1[k][h] * loss1[kp][h];
        if (wh == 0.0) continue;
        for (int l = l_lo; l <= kmin - m; ++l) {
          const double w = ck * wh * loss2[k][l] * loss2[kp][l];
          if (w == 0.0) continue;
          rho((k - n - h) * d + (k - m - l), (kp - n - h) * d + (kp - m - l)) += w;
        }
      }
    }
  }
  const double kept = rho.trace().real();
  detail::require_nonzero_norm(model, kept);
  rho /= kept;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  TruncatedState out{TwoModeState(n_c, std::move(rho)), std::max(0.0, 1.0 - kept / norm_sq), false};
  out.truncation_warning = out.discarded_weight > kTruncationWarnThreshold;
  return out;
}

}  // namespace psgen::fock
