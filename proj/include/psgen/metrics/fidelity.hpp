#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "psgen/common/error.hpp"
#include "psgen/fock/state.hpp"

namespace psgen::metrics {

using fock::Matrix;
using fock::TwoModeState;

/// Eigenvalues below this are treated as negative input rather than noise.
inline constexpr double kPsdTolerance = 1e-8;

namespace detail {

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

/// Principal square root of a PSD matrix; tiny negative eigenvalues are clamped.
inline Matrix psd_sqrt(const Matrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(m));
  const Eigen::VectorXd ev = solver.eigenvalues();
  if (ev.minCoeff() < -kPsdTolerance) throw DomainError(std::string(what) + " is not positive semidefinite");
  const Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace detail

/// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2, clamped to [0, 1].
inline double uhlmann_fidelity(const TwoModeState& a, const TwoModeState& b) {
  if (a.cutoff() != b.cutoff()) throw DomainError("fidelity requires equal cutoffs");
  const Matrix sa = detail::psd_sqrt(a.matrix(), "first state");
  {
    Eigen::SelfAdjointEigenSolver<Matrix> check(detail::hermitian_part(b.matrix()), Eigen::EigenvaluesOnly);
    if (check.eigenvalues().minCoeff() < -kPsdTolerance) throw DomainError("second state is not positive semidefinite");
  }
  const Matrix inner = detail::hermitian_part(sa * b.matrix() * sa);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(inner, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (int i = 0; i < solver.eigenvalues().size(); ++i) s += std::sqrt(std::max(0.0, solver.eigenvalues()(i)));
  return std::clamp(s * s, 0.0, 1.0);
}

}  // namespace psgen::metrics
