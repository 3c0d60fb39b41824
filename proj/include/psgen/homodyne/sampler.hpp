#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/common/random.hpp"
#include "psgen/homodyne/povm.hpp"

namespace psgen::homodyne {

struct QuadratureGrid {
  double lo = -6.0;
  double hi = 6.0;
  double step = 0.02;
  /// Largest tolerated probability mass outside [lo, hi].
  double max_outside = 1e-4;

  int cells() const { return static_cast<int>(std::lround((hi - lo) / step)); }
  double midpoint(int j) const { return lo + (j + 0.5) * step; }
};

/// Draws (x1, x2) from the joint homodyne density of a state.
///
/// x1 is drawn from its marginal by inverse CDF over grid cells, jittered
/// uniformly inside the chosen cell; x2 is then drawn the same way from the
/// conditional density at that exact x1. Wavefunctions at the cell midpoints
/// are tabulated once per sampler.
class GridSampler {
 public:
  explicit GridSampler(TwoModeState state, QuadratureGrid grid = {})
      : state_(std::move(state)), grid_(grid), d_(state_.cutoff() + 1) {
    rho1_ = state_.reduced(1);
    const int cells = grid_.cells();
    table_.resize(static_cast<std::size_t>(cells) * d_);
    for (int j = 0; j < cells; ++j) {
      const auto psi = wavefunctions(state_.cutoff(), grid_.midpoint(j));
      std::copy(psi.begin(), psi.end(), table_.begin() + static_cast<std::ptrdiff_t>(j) * d_);
    }
  }

  const TwoModeState& state() const { return state_; }
  const QuadratureGrid& grid() const { return grid_; }

  std::pair<double, double> sample(double theta1, double theta2, random::Engine& rng) const {
    std::vector<double> weights;
    const double x1 = draw(rho1_, theta1, 1.0, rng, weights);
    // Conditional mode-2 operator <u1| rho |u1>, with u1 the mode-1 homodyne ket.
    const Vector u1 = quadrature_ket(x1, theta1, state_.cutoff());
    Matrix cond = Matrix::Zero(d_, d_);
    for (int a = 0; a < d_; ++a)
      for (int ap = 0; ap < d_; ++ap) {
        const Complex w = std::conj(u1(a)) * u1(ap);
        if (w == Complex(0.0)) continue;
        cond.noalias() += w * state_.matrix().block(a * d_, ap * d_, d_, d_);
      }
    const double px1 = cond.trace().real();
    if (!(px1 > 0.0)) return {x1, draw(Matrix::Identity(d_, d_) / static_cast<double>(d_), theta2, 0.0, rng, weights)};
    const double x2 = draw(cond / px1, theta2, 0.0, rng, weights);
    return {x1, x2};
  }

 private:
  /// Inverse-CDF draw from the density <u|op|u> of a single-mode operator.
  /// When expected_mass > 0, raises if the grid holds less than expected_mass - max_outside.
  double draw(const Matrix& op, double theta, double expected_mass, random::Engine& rng,
              std::vector<double>& cdf) const {
    // Real symmetric form: p(x) = psi^T Re(D^dag op D) psi with D = diag(e^{-i n theta}).
    Eigen::MatrixXd b(d_, d_);
    for (int m = 0; m < d_; ++m)
      for (int n = 0; n < d_; ++n) b(m, n) = (op(m, n) * std::polar(1.0, (m - n) * theta)).real();
    const int cells = grid_.cells();
    cdf.resize(cells);
    double acc = 0.0;
    for (int j = 0; j < cells; ++j) {
      const Eigen::Map<const Eigen::VectorXd> psi(table_.data() + static_cast<std::ptrdiff_t>(j) * d_, d_);
      const double p = std::max(0.0, psi.dot(b * psi));
      acc += p * grid_.step;
      cdf[j] = acc;
    }
    if (expected_mass > 0.0 && acc < expected_mass - grid_.max_outside)
      throw GridMassError("quadrature grid misses more than the tolerated probability mass; widen the grid");
    if (!(acc > 0.0)) throw GridMassError("quadrature density vanishes on the grid");
    const double target = random::uniform01(rng) * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    const int j = std::min<int>(cells - 1, static_cast<int>(it - cdf.begin()));
    return grid_.lo + (j + random::uniform01(rng)) * grid_.step;
  }

  TwoModeState state_;
  QuadratureGrid grid_;
  int d_;
  Matrix rho1_;
  std::vector<double> table_;
};

/// `count` draws at fixed phases from a fresh engine seeded with `seed`.
inline std::vector<std::pair<double, double>> sample_quadratures(const TwoModeState& state, double theta1,
                                                                 double theta2, std::uint64_t seed,
                                                                 std::size_t count = 1) {
  GridSampler sampler(state);
  random::Engine rng(seed);
  std::vector<std::pair<double, double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.sample(theta1, theta2, rng));
  return out;
}

/// Bivariate-normal draws matching a state's first and second quadrature moments.
///
/// Exact for Gaussian states (such as the lossy unsubtracted state); used for
/// the bulk background samples where grid sampling would be too slow. The
/// phase dependence is carried by a handful of precomputed ladder moments.
class GaussianQuadratureSampler {
 public:
  explicit GaussianQuadratureSampler(const TwoModeState& s) {
    const int d = s.cutoff() + 1;
    const Matrix a = annihilation(s.cutoff());
    const Matrix id = Matrix::Identity(d, d);
    auto kron = [&](const Matrix& x, const Matrix& y) {
      Matrix out(d * d, d * d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out.block(i * d, j * d, d, d) = x(i, j) * y;
      return out;
    };
    const Matrix a1 = kron(a, id);
    const Matrix a2 = kron(id, a);
    auto ev = [&](const Matrix& op) { return (s.matrix() * op).trace(); };
    m1_ = ev(a1);
    m2_ = ev(a2);
    a1a1_ = ev(a1 * a1);
    a2a2_ = ev(a2 * a2);
    n1_ = ev(a1.adjoint() * a1).real();
    n2_ = ev(a2.adjoint() * a2).real();
    a1a2_ = ev(a1 * a2);
    a1a2d_ = ev(a1 * a2.adjoint());
  }

  QuadratureMoments moments(double theta1, double theta2) const {
    const Complex e1 = std::polar(1.0, theta1);
    const Complex e2 = std::polar(1.0, theta2);
    QuadratureMoments m;
    m.mean1 = std::sqrt(2.0) * (m1_ * e1).real();
    m.mean2 = std::sqrt(2.0) * (m2_ * e2).real();
    m.var1 = (a1a1_ * e1 * e1).real() + n1_ + 0.5 - m.mean1 * m.mean1;
    m.var2 = (a2a2_ * e2 * e2).real() + n2_ + 0.5 - m.mean2 * m.mean2;
    m.cov = (a1a2_ * e1 * e2).real() + (a1a2d_ * e1 * std::conj(e2)).real() - m.mean1 * m.mean2;
    return m;
  }

  std::pair<double, double> sample(double theta1, double theta2, random::Engine& rng) const {
    const auto m = moments(theta1, theta2);
    const double s1 = std::sqrt(std::max(0.0, m.var1));
    const double z1 = random::normal(rng);
    const double z2 = random::normal(rng);
    if (s1 == 0.0) return {m.mean1, m.mean2 + std::sqrt(std::max(0.0, m.var2)) * z2};
    const double beta = m.cov / s1;
    const double rest = std::sqrt(std::max(0.0, m.var2 - beta * beta));
    return {m.mean1 + s1 * z1, m.mean2 + beta * z1 + rest * z2};
  }

 private:
  Complex m1_, m2_, a1a1_, a2a2_, a1a2_, a1a2d_;
  double n1_ = 0.0, n2_ = 0.0;
};

}  // namespace psgen::homodyne
