#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/fock/state.hpp"

namespace psgen::homodyne {

using fock::Complex;
using fock::Matrix;
using fock::TwoModeState;
using fock::Vector;

/// psi_0..psi_{n_max} at x via the normalized three-term recurrence.
inline std::vector<double> wavefunctions(int n_max, double x) {
  if (n_max < 0) throw DomainError("n_max must be >= 0");
  std::vector<double> psi(n_max + 1);
  psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  if (n_max >= 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (int n = 1; n < n_max; ++n)
    psi[n + 1] = std::sqrt(2.0 / (n + 1)) * x * psi[n] - std::sqrt(static_cast<double>(n) / (n + 1)) * psi[n - 1];
  return psi;
}

/// Harmonic-oscillator eigenfunction psi_n(x) (vacuum variance 1/2).
inline double oscillator_wavefunction(int n, double x) {
  if (n < 0) throw DomainError("n must be >= 0");
  return wavefunctions(n, x)[n];
}

/// Single-mode homodyne amplitude vector u with u_n = psi_n(x) e^{-i n theta};
/// the POVM element is u u^dag.
inline Vector quadrature_ket(double x, double theta, int n_c) {
  const auto psi = wavefunctions(n_c, x);
  Vector u(n_c + 1);
  for (int n = 0; n <= n_c; ++n) u(n) = psi[n] * std::polar(1.0, -n * theta);
  return u;
}

struct PovmElement {
  double x = 0.0;
  double theta = 0.0;
  Matrix matrix;
};

/// Pi(x; theta)_{mn} = psi_m(x) psi_n(x) e^{-i(m-n) theta}.
inline PovmElement povm_element(double x, double theta, int n_c) {
  if (!std::isfinite(x)) throw DomainError("quadrature value must be finite");
  const Vector u = quadrature_ket(x, theta, n_c);
  return {x, theta, u * u.adjoint()};
}

/// Tr[rho Pi_1(x1;theta1) (x) Pi_2(x2;theta2)], with tiny negatives clamped to 0.
inline double joint_probability(const TwoModeState& state, double x1, double x2, double theta1, double theta2) {
  const int n_c = state.cutoff();
  const Vector u1 = quadrature_ket(x1, theta1, n_c);
  const Vector u2 = quadrature_ket(x2, theta2, n_c);
  Vector u(state.dim());
  for (int a = 0; a <= n_c; ++a)
    for (int b = 0; b <= n_c; ++b) u(a * (n_c + 1) + b) = u1(a) * u2(b);
  const double p = (u.adjoint() * state.matrix() * u)(0, 0).real();
  return p < 0.0 && p > -1e-14 ? 0.0 : p;
}

/// Single-mode annihilation operator on cutoff n_c.
inline Matrix annihilation(int n_c) {
  Matrix a = Matrix::Zero(n_c + 1, n_c + 1);
  for (int n = 1; n <= n_c; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// The quadrature whose eigenvectors define the POVM above:
/// x_theta = (a e^{i theta} + a^dag e^{-i theta}) / sqrt(2).
inline Matrix quadrature_operator(int n_c, double theta) {
  const Matrix a = annihilation(n_c) * std::polar(1.0, theta);
  return (a + a.adjoint()) / std::sqrt(2.0);
}

/// First and second moments of (x1, x2) at the given phases, from the matrix elements.
struct QuadratureMoments {
  double mean1 = 0.0, mean2 = 0.0;
  double var1 = 0.0, var2 = 0.0, cov = 0.0;
};

/// x_theta^2 with exact matrix elements inside the truncation (not the square
/// of the truncated x_theta, which is wrong in the top Fock level).
inline Matrix quadrature_square(int n_c, double theta) {
  const Matrix a = annihilation(n_c);
  const Complex e2 = std::polar(1.0, 2.0 * theta);
  const Matrix a2 = a * a;
  Matrix out = (a2 * e2 + a2.adjoint() * std::conj(e2)) / 2.0;
  for (int n = 0; n <= n_c; ++n) out(n, n) += n + 0.5;
  return out;
}

inline QuadratureMoments quadrature_moments(const TwoModeState& s, double theta1, double theta2) {
  const int d = s.cutoff() + 1;
  const Matrix id = Matrix::Identity(d, d);
  auto kron = [&](const Matrix& a, const Matrix& b) {
    Matrix out(d * d, d * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out.block(i * d, j * d, d, d) = a(i, j) * b;
    return out;
  };
  const Matrix q1 = quadrature_operator(s.cutoff(), theta1);
  const Matrix q2 = quadrature_operator(s.cutoff(), theta2);
  auto ev = [&](const Matrix& op) { return (s.matrix() * op).trace().real(); };
  QuadratureMoments m;
  m.mean1 = ev(kron(q1, id));
  m.mean2 = ev(kron(id, q2));
  m.var1 = ev(kron(quadrature_square(s.cutoff(), theta1), id)) - m.mean1 * m.mean1;
  m.var2 = ev(kron(id, quadrature_square(s.cutoff(), theta2))) - m.mean2 * m.mean2;
  m.cov = ev(kron(q1, q2)) - m.mean1 * m.mean2;
  return m;
}

}  // namespace psgen::homodyne
