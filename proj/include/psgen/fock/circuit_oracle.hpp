#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/fock/model.hpp"
#include "psgen/fock/state.hpp"

namespace psgen::fock {

/// Brute-force circuit simulation of subtraction and loss.
///
/// Every beamsplitter is an explicit unitary exp(theta (a_i^dag a_j - a_i a_j^dag))
/// obtained by diagonalizing its generator inside each total-photon-number
/// block. None of the binomial closed forms are used, so this is the
/// reference the analytic construction is checked against.
class CircuitOracle {
 public:
  /// U |k>_i |0>_j expanded on |k-h>_i |h>_j, for k = 0..n_work.
  ///
  /// Entry [k][h] is the amplitude of |k-h, h>. Reflectivity is sin^2(theta).
  static std::vector<std::vector<double>> beamsplitter_columns(int n_work, double reflectivity) {
    const double theta = std::asin(std::sqrt(std::clamp(reflectivity, 0.0, 1.0)));
    std::vector<std::vector<double>> cols(n_work + 1);
    for (int k = 0; k <= n_work; ++k) {
      // Block basis |p, k-p>, p = 0..k. a_i^dag a_j |p,q> = sqrt((p+1) q) |p+1, q-1>.
      const int b = k + 1;
      Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(b, b);
      for (int p = 0; p < k; ++p) {
        const int q = k - p;
        const double v = std::sqrt((p + 1.0) * q);
        gen(p + 1, p) += v;   // a_i^dag a_j
        gen(p, p + 1) -= v;   // -a_i a_j^dag
      }
      // gen is real antisymmetric: i*gen is Hermitian.
      const Eigen::MatrixXcd herm = Complex(0.0, 1.0) * gen.cast<Complex>();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm);
      const Eigen::VectorXcd phases =
          (solver.eigenvalues().cast<Complex>() * Complex(0.0, -theta)).array().exp();
      const Eigen::MatrixXcd unitary =
          solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
      // Input |k, 0> is block index p = k; output |k-h, h> is p = k-h.
      cols[k].resize(b);
      for (int h = 0; h <= k; ++h) cols[k][h] = unitary(k - h, k).real();
    }
    return cols;
  }

  struct Result {
    TwoModeState state;   // normalized, on the working cutoff
    double probability;   // squared norm after projecting the ancillas
  };

  /// Full circuit: TMSV -> tap beamsplitters -> ancilla projection -> loss -> trace.
  ///
  /// The state is simulated on cutoff n_work; only the block with both photon
  /// numbers <= n_out is materialized (n_out < 0 means n_out = n_work). The
  /// returned block is normalized by the full post-selection probability, so
  /// its trace is the weight inside the block.
  static Result run(const SubtractionModel& model, int n_work, int n_out = -1) {
    model.validate();
    if (n_out < 0 || n_out > n_work) n_out = n_work;
    const double t = model.t_r();
    if (n_work < 1) throw CutoffError("working cutoff must be >= 1");
    const double tail = std::pow(t, 2.0 * (n_work + 1));
    if (tail >= 1e-12) throw CutoffError("working cutoff too small: TMSV tail weight >= 1e-12");

    const int d = n_work + 1;
    // TMSV amplitudes sqrt(1-t^2) (-t)^k |k,k>.
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < d; ++k) psi(k, k) = std::sqrt(1.0 - t * t) * std::pow(-t, k);

    // Tap on mode 1 with ancilla 3 projected on |n>.
    const auto tap1 = beamsplitter_columns(n_work, model.R1);
    const auto tap2 = beamsplitter_columns(n_work, model.R2);
    Eigen::MatrixXd after = Eigen::MatrixXd::Zero(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        if (psi(a, b) == 0.0 || a < model.n_sub || b < model.m_sub) continue;
        after(a - model.n_sub, b - model.m_sub) +=
            psi(a, b) * tap1[a][model.n_sub] * tap2[b][model.m_sub];
      }
    const double probability = after.squaredNorm();
    if (!(probability > 0.0)) throw ZeroProbabilityError("oracle: projection has zero probability");

    // Loss: environment beamsplitters, then trace over the environment.
    const auto env1 = beamsplitter_columns(n_work, 1.0 - model.eta1);
    const auto env2 = beamsplitter_columns(n_work, 1.0 - model.eta2);
    const int e = n_out + 1;
    Matrix rho = Matrix::Zero(e * e, e * e);
    for (int h = 0; h < d; ++h) {
      for (int l = 0; l < d; ++l) {
        // Branch amplitude <h,l|_E U_E |psi>|0,0>_E.
        Eigen::MatrixXd branch = Eigen::MatrixXd::Zero(e, e);
        bool any = false;
        for (int a = h; a < d && a - h < e; ++a)
          for (int b = l; b < d && b - l < e; ++b) {
            const double v = after(a, b);
            if (v == 0.0) continue;
            const double w = v * env1[a][h] * env2[b][l];
            if (w == 0.0) continue;
            branch(a - h, b - l) += w;
            any = true;
          }
        if (!any) continue;
        Vector flat(e * e);
        for (int a = 0; a < e; ++a)
          for (int b = 0; b < e; ++b) flat(a * e + b) = branch(a, b);
        rho.noalias() += flat * flat.adjoint();
      }
    }
    rho /= probability;
    return {TwoModeState(n_out, rho), probability};
  }

  /// Working cutoff for an accurate block up to n_out: the TMSV tail bound, and
  /// enough headroom above n_out for the subtracted photons and the loss feed-down.
  static int required_cutoff(const SubtractionModel& model, int n_out = 0) {
    const double t = model.t_r();
    int n = std::max(1, n_out + model.k_min() + 6);
    if (t == 0.0) return n;
    while (std::pow(t, 2.0 * (n + 1)) >= 1e-12) ++n;
    return n;
  }
};

/// Normalized oracle state on the full working cutoff.
inline TwoModeState circuit_oracle(const SubtractionModel& model, int n_c_work) {
  auto result = CircuitOracle::run(model, n_c_work);
  return TwoModeState(n_c_work, result.state.matrix() / result.state.trace());
}

}  // namespace psgen::fock
