#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/common/numeric.hpp"
#include "psgen/fock/state.hpp"
#include "psgen/homodyne/povm.hpp"
#include "psgen/tomography/dataset.hpp"

namespace psgen::tomography {

using fock::Complex;
using fock::Matrix;
using fock::TwoModeState;

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kMaxFlooredFraction = 0.01;
inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr int kDefaultMaxIterations = 2000;

/// Records processed per GEMM block; partial sums over blocks are combined pairwise.
inline constexpr int kBlockRows = 256;

/// Homodyne kets of every record, u_i = u1(x1,theta1) (x) u2(x2,theta2), as rows.
class PovmTable {
 public:
  explicit PovmTable(const TomographyDataset& data) : n_c_(data.cutoff()), weights_(data.size()) {
    const int d = n_c_ + 1;
    const int dim = d * d;
    rows_.resize(static_cast<Eigen::Index>(data.size()), dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& r = data.records()[i];
      const auto u1 = homodyne::quadrature_ket(r.x1, r.theta1, n_c_);
      const auto u2 = homodyne::quadrature_ket(r.x2, r.theta2, n_c_);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) rows_(static_cast<Eigen::Index>(i), a * d + b) = u1(a) * u2(b);
      weights_[i] = r.weight;
    }
  }

  int cutoff() const { return n_c_; }
  Eigen::Index size() const { return rows_.rows(); }
  const Matrix& rows() const { return rows_; }
  const std::vector<double>& weights() const { return weights_; }

  /// p_i = u_i^dag rho u_i for every record.
  std::vector<double> probabilities(const Matrix& rho) const {
    // Row i of conj(U) rho^T ... written as (U* rho) . U summed along columns.
    const Matrix left = rows_.conjugate() * rho;
    std::vector<double> p(static_cast<std::size_t>(size()));
    for (Eigen::Index i = 0; i < size(); ++i) p[static_cast<std::size_t>(i)] = (left.row(i).cwiseProduct(rows_.row(i))).sum().real();
    return p;
  }

 private:
  int n_c_;
  Matrix rows_;
  std::vector<double> weights_;
};

/// Result of accumulating R at a given rho.
struct ROperator {
  Matrix r;
  std::vector<double> probabilities;  // unfloored
  std::size_t floored = 0;
  double log_likelihood = 0.0;
};

namespace detail {

inline Matrix pairwise_matrix_sum(std::span<const Matrix> parts) {
  if (parts.size() == 1) return parts[0];
  const std::size_t half = parts.size() / 2;
  return pairwise_matrix_sum(parts.first(half)) + pairwise_matrix_sum(parts.subspan(half));
}

}  // namespace detail

/// R = sum_i w_i Pi_i / p_i with p_i floored at 1e-12.
///
/// Throws ReconstructionError if more than 1% of the records need the floor.
inline ROperator r_operator(const Matrix& rho, const PovmTable& table) {
  if (table.size() == 0) throw DomainError("empty dataset");
  ROperator out;
  out.probabilities = table.probabilities(rho);
  const auto n = static_cast<std::size_t>(table.size());
  std::vector<double> scale(n);
  std::vector<double> logs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double p = out.probabilities[i];
    if (!(p >= kProbabilityFloor)) {
      p = kProbabilityFloor;
      ++out.floored;
    }
    scale[i] = table.weights()[i] / p;
    logs[i] = table.weights()[i] * std::log(p);
  }
  if (static_cast<double>(out.floored) > kMaxFlooredFraction * static_cast<double>(n))
    throw ReconstructionError("more than 1% of records have probability below the floor");
  out.log_likelihood = numeric::pairwise_sum<double>(logs);

  // R = U^T diag(scale) conj(U), accumulated in fixed blocks.
  const Matrix& u = table.rows();
  std::vector<Matrix> parts;
  for (Eigen::Index start = 0; start < table.size(); start += kBlockRows) {
    const Eigen::Index rows = std::min<Eigen::Index>(kBlockRows, table.size() - start);
    const auto block = u.middleRows(start, rows);
    const Eigen::Map<const Eigen::VectorXd> s(scale.data() + start, rows);
    parts.push_back(block.transpose() * s.cast<Complex>().asDiagonal() * block.conjugate());
  }
  out.r = detail::pairwise_matrix_sum(parts);
  out.r = 0.5 * (out.r + out.r.adjoint()).eval();
  return out;
}

inline ROperator r_operator(const TwoModeState& rho, const TomographyDataset& data) {
  if (rho.cutoff() != data.cutoff()) throw DomainError("state and dataset cutoffs differ");
  return r_operator(rho.matrix(), PovmTable(data));
}

inline double log_likelihood(const TwoModeState& rho, const TomographyDataset& data) {
  return r_operator(rho, data).log_likelihood;
}

/// rho' = R rho R / Tr[R rho R], with eigenvalue clamping when the result is not PSD.
///
/// `repaired` is incremented when the clamp was needed.
inline Matrix rrhor_update(const Matrix& rho, const Matrix& r, int* repaired = nullptr) {
  Matrix next = r * rho * r;
  next = 0.5 * (next + next.adjoint()).eval();
  const double tr = next.trace().real();
  if (!(tr > 0.0)) throw ReconstructionError("R rho R has vanishing trace");
  next /= tr;
  Eigen::SelfAdjointEigenSolver<Matrix> es(next);
  if (es.eigenvalues().minCoeff() < -1e-10) {
    const Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
    next = es.eigenvectors() * clamped.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    next /= next.trace().real();
    next = 0.5 * (next + next.adjoint()).eval();
    if (repaired) ++*repaired;
  }
  return next;
}

inline TwoModeState rrhor_step(const TwoModeState& rho, const TomographyDataset& data, int* repaired = nullptr) {
  const auto r = r_operator(rho, data);
  return TwoModeState(rho.cutoff(), rrhor_update(rho.matrix(), r.r, repaired));
}

struct ReconstructionReport {
  TwoModeState rho;
  int iterations = 0;
  /// lambda_max(R) - N at the returned state (N = total record weight).
  double final_bound = 0.0;
  double threshold = 0.0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;
  int psd_repairs = 0;
  std::size_t floored_records = 0;
  std::size_t records = 0;
};

struct ReconstructionOptions {
  int max_iterations = kDefaultMaxIterations;
  double epsilon = kDefaultEpsilon;
};

/// Iterates RρR from the maximally mixed state.
///
/// Stopping statistic: lambda_max(R) - N, which bounds the log-likelihood gap
/// to the maximum; stops once it is below epsilon * N.
inline ReconstructionReport reconstruct(const TomographyDataset& data, ReconstructionOptions opt = {}) {
  if (data.empty()) throw DomainError("cannot reconstruct from an empty dataset");
  if (opt.max_iterations < 0 || !(opt.epsilon > 0.0)) throw DomainError("invalid reconstruction options");
  const PovmTable table(data);
  const int dim = data.dim();
  const double n = data.total_weight();
  ReconstructionReport rep;
  rep.records = data.size();
  rep.threshold = opt.epsilon * n;
  Matrix rho = Matrix::Identity(dim, dim) / static_cast<double>(dim);
  for (int it = 0;; ++it) {
    const auto r = r_operator(rho, table);
    rep.log_likelihood_trace.push_back(r.log_likelihood);
    rep.floored_records = r.floored;
    Eigen::SelfAdjointEigenSolver<Matrix> es(r.r, Eigen::EigenvaluesOnly);
    rep.final_bound = es.eigenvalues().maxCoeff() - n;
    rep.iterations = it;
    if (rep.final_bound < rep.threshold) {
      rep.converged = true;
      break;
    }
    if (it >= opt.max_iterations) break;
    rho = rrhor_update(rho, r.r, &rep.psd_repairs);
  }
  rep.rho = TwoModeState(data.cutoff(), rho);
  return rep;
}

}  // namespace psgen::tomography
