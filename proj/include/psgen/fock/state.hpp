#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <utility>

#include "psgen/common/error.hpp"

namespace psgen::fock {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Density matrix over the truncated two-mode Fock basis |n,m>, 0 <= n,m <= n_c.
///
/// The flat index of |n,m> is n*(n_c+1)+m (mode 1 is the slow index).
class TwoModeState {
 public:
  TwoModeState() = default;

  TwoModeState(int n_c, Matrix rho) : n_c_(n_c), rho_(std::move(rho)) {
    if (n_c_ < 0) throw DomainError("cutoff must be >= 0");
    if (rho_.rows() != dim() || rho_.cols() != dim())
      throw DomainError("density matrix dimension does not match the cutoff");
  }

  static TwoModeState vacuum(int n_c) { return fock(n_c, 0, 0); }

  static TwoModeState fock(int n_c, int n, int m) {
    const int d = (n_c + 1) * (n_c + 1);
    Matrix rho = Matrix::Zero(d, d);
    rho(n * (n_c + 1) + m, n * (n_c + 1) + m) = 1.0;
    return TwoModeState(n_c, std::move(rho));
  }

  static TwoModeState maximally_mixed(int n_c) {
    const int d = (n_c + 1) * (n_c + 1);
    return TwoModeState(n_c, Matrix::Identity(d, d) / static_cast<double>(d));
  }

  /// |psi><psi| / <psi|psi>.
  static TwoModeState pure(int n_c, const Vector& psi) {
    const double norm_sq = psi.squaredNorm();
    if (!(norm_sq > 0.0)) throw ZeroProbabilityError("cannot normalize a zero vector");
    return TwoModeState(n_c, psi * psi.adjoint() / norm_sq);
  }

  int cutoff() const { return n_c_; }
  int dim() const { return (n_c_ + 1) * (n_c_ + 1); }
  int index(int n, int m) const { return n * (n_c_ + 1) + m; }

  const Matrix& matrix() const { return rho_; }
  Complex operator()(int row, int col) const { return rho_(row, col); }
  Complex element(int n, int m, int np, int mp) const { return rho_(index(n, m), index(np, mp)); }
  double population(int n, int m) const { return element(n, m, n, m).real(); }

  double trace() const { return rho_.trace().real(); }

  double hermiticity_residual() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }

  Eigen::VectorXd eigenvalues() const {
    const Matrix herm = 0.5 * (rho_ + rho_.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
  }

  double min_eigenvalue() const { return eigenvalues().minCoeff(); }

  double purity() const { return (rho_ * rho_).trace().real(); }

  /// Reduced state of mode 1 (mode == 1) or mode 2 (mode == 2).
  Matrix reduced(int mode) const {
    const int d = n_c_ + 1;
    Matrix out = Matrix::Zero(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int k = 0; k < d; ++k)
          out(a, b) += mode == 1 ? rho_(index(a, k), index(b, k)) : rho_(index(k, a), index(k, b));
    return out;
  }

  /// Restrict to a smaller cutoff and renormalize.
  TwoModeState truncated(int n_c) const {
    if (n_c > n_c_) throw DomainError("cannot truncate to a larger cutoff");
    const int d = (n_c + 1) * (n_c + 1);
    Matrix out(d, d);
    for (int n = 0; n <= n_c; ++n)
      for (int m = 0; m <= n_c; ++m)
        for (int np = 0; np <= n_c; ++np)
          for (int mp = 0; mp <= n_c; ++mp)
            out(n * (n_c + 1) + m, np * (n_c + 1) + mp) = element(n, m, np, mp);
    const double tr = out.trace().real();
    if (!(tr > 0.0)) throw ZeroProbabilityError("truncated state has zero trace");
    return TwoModeState(n_c, out / tr);
  }

  /// Embed in a larger cutoff (zero padding).
  TwoModeState padded(int n_c) const {
    if (n_c < n_c_) throw DomainError("cannot pad to a smaller cutoff");
    const int d = (n_c + 1) * (n_c + 1);
    Matrix out = Matrix::Zero(d, d);
    for (int n = 0; n <= n_c_; ++n)
      for (int m = 0; m <= n_c_; ++m)
        for (int np = 0; np <= n_c_; ++np)
          for (int mp = 0; mp <= n_c_; ++mp)
            out(n * (n_c + 1) + m, np * (n_c + 1) + mp) = element(n, m, np, mp);
    return TwoModeState(n_c, out);
  }

  /// Apply exp(i(theta1 n1 + theta2 n2)) rho exp(-i(...)).
  TwoModeState phase_rotated(double theta1, double theta2) const {
    Matrix out = rho_;
    for (int n = 0; n <= n_c_; ++n)
      for (int m = 0; m <= n_c_; ++m)
        for (int np = 0; np <= n_c_; ++np)
          for (int mp = 0; mp <= n_c_; ++mp)
            out(index(n, m), index(np, mp)) *=
                std::polar(1.0, theta1 * (n - np) + theta2 * (m - mp));
    return TwoModeState(n_c_, out);
  }

  /// Swap the roles of the two modes.
  TwoModeState swapped() const {
    Matrix out(dim(), dim());
    for (int n = 0; n <= n_c_; ++n)
      for (int m = 0; m <= n_c_; ++m)
        for (int np = 0; np <= n_c_; ++np)
          for (int mp = 0; mp <= n_c_; ++mp) out(index(m, n), index(mp, np)) = element(n, m, np, mp);
    return TwoModeState(n_c_, out);
  }

  /// Throws DomainError unless Hermitian, unit-trace and PSD within tolerances.
  void check_valid(double herm_tol = 1e-12, double trace_tol = 1e-10, double eig_tol = 1e-10) const {
    if (hermiticity_residual() > herm_tol) throw DomainError("state is not Hermitian");
    if (std::abs(trace() - 1.0) > trace_tol) throw DomainError("state trace differs from 1");
    if (min_eigenvalue() < -eig_tol) throw DomainError("state has a negative eigenvalue");
  }

 private:
  int n_c_ = 0;
  Matrix rho_ = Matrix::Ones(1, 1);
};

}  // namespace psgen::fock
