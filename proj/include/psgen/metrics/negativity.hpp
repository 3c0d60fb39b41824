#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "psgen/common/error.hpp"
#include "psgen/fock/state.hpp"

namespace psgen::metrics {

using fock::Matrix;
using fock::TwoModeState;

/// Partial transpose on the given mode (1 or 2), in the same flat basis.
inline Matrix partial_transpose(const TwoModeState& s, int mode = 2) {
  if (mode != 1 && mode != 2) throw DomainError("mode must be 1 or 2");
  const int n_c = s.cutoff();
  Matrix pt(s.dim(), s.dim());
  for (int n = 0; n <= n_c; ++n)
    for (int m = 0; m <= n_c; ++m)
      for (int np = 0; np <= n_c; ++np)
        for (int mp = 0; mp <= n_c; ++mp)
          pt(s.index(n, m), s.index(np, mp)) =
              mode == 2 ? s.element(n, mp, np, m) : s.element(np, m, n, mp);
  return pt;
}

/// log2 of the trace norm of the partial transpose.
///
/// Eigenvalues with magnitude below 1e-12 are dropped before summing.
inline double log_negativity(const TwoModeState& s, int mode = 2) {
  const Matrix pt = partial_transpose(s, mode);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (pt + pt.adjoint()), Eigen::EigenvaluesOnly);
  double norm = 0.0;
  for (int i = 0; i < solver.eigenvalues().size(); ++i) {
    const double ev = solver.eigenvalues()(i);
    if (std::abs(ev) > 1e-12) norm += std::abs(ev);
  }
  return std::max(0.0, std::log2(norm));
}

/// Log negativity of the pure lambda ladder; `subtracted` selects the
/// one-photon-per-mode state instead of the plain squeezed ladder.
inline double closed_form_log_negativity(double lambda, bool subtracted) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw DomainError("lambda must lie in [0, 1)");
  const double plain = std::log2((1.0 + lambda) / (1.0 - lambda));
  if (!subtracted) return plain;
  return std::log2(std::pow(1.0 + lambda, 3) / ((1.0 + lambda * lambda) * (1.0 - lambda)));
}

}  // namespace psgen::metrics
