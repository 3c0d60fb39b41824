#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "psgen/fock/subtraction.hpp"
#include "psgen/homodyne/sampler.hpp"
#include "psgen/metrics/fidelity.hpp"
#include "psgen/tomography/mle.hpp"
#include "psgen/tomography/rolling.hpp"

using namespace psgen;
using namespace psgen::fock;
using namespace psgen::tomography;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

TwoModeState reference_state(int n, int m, int n_c = 6) {
  return lossy_subtracted_state(SubtractionModel::symmetric(0.3, 0.14, 0.55, 0.50, n, m), n_c).state;
}

/// Samples at uniformly random phases.
std::vector<QuadratureSample> draw(const TwoModeState& s, std::size_t n, std::uint64_t seed) {
  homodyne::GridSampler sampler(s);
  random::Engine rng(seed);
  std::vector<QuadratureSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double t1 = kTwoPi * random::uniform01(rng);
    const double t2 = kTwoPi * random::uniform01(rng);
    const auto [x1, x2] = sampler.sample(t1, t2, rng);
    out.push_back({x1, x2, t1, t2});
  }
  return out;
}

/// Gauss-Hermite nodes and weights (weight function e^{-x^2}) by Golub-Welsch.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = std::sqrt(std::numbers::pi) * std::pow(es.eigenvectors()(0, i), 2);
  return {es.eigenvalues(), w};
}

}  // namespace

TEST(Dataset, CanonicalOrderAndValidation) {
  std::vector<QuadratureSample> recs{{0.5, 0.1, 7.0, -1.0}, {-0.2, 0.3, 1.0, 2.0}};
  TomographyDataset d(3, recs);
  EXPECT_EQ(d.size(), 2u);
  for (const auto& r : d.records()) {
    EXPECT_GE(r.theta1, 0.0);
    EXPECT_LT(r.theta1, kTwoPi);
    EXPECT_GE(r.theta2, 0.0);
  }
  std::reverse(recs.begin(), recs.end());
  EXPECT_EQ(TomographyDataset(3, recs).records(), d.records());
  EXPECT_TRUE(d.undersized());
  EXPECT_THROW(TomographyDataset(3, {{NAN, 0, 0, 0}}), DomainError);
}

TEST(ROperator, SingleRecordUniformState) {
  TomographyDataset d(2, {{0.4, -0.9, 0.3, 1.2}});
  const int dim = d.dim();
  const auto r = r_operator(TwoModeState::maximally_mixed(2), d);
  const auto u1 = homodyne::povm_element(0.4, 0.3, 2).matrix;
  const auto u2 = homodyne::povm_element(-0.9, 1.2, 2).matrix;
  Matrix pi(dim, dim);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int e = 0; e < 3; ++e) pi(a * 3 + b, c * 3 + e) = u1(a, c) * u2(b, e);
  const Matrix expected = dim * pi / pi.trace().real();
  EXPECT_LT((r.r - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ROperator, HermitianPsd) {
  const auto data = TomographyDataset(3, draw(reference_state(1, 1).truncated(3), 300, 4));
  const auto r = r_operator(reference_state(0, 0).truncated(3), data);
  EXPECT_LT((r.r - r.r.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(r.r);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9);
}

TEST(ROperator, ApproachesIdentityForTrueState) {
  // Deviation weighted by sqrt(rho): every summand sqrt(rho) Pi_i sqrt(rho) / p_i has
  // unit norm, whereas the raw 1/p_i is heavy-tailed near the density's zeros.
  const auto truth = reference_state(0, 0).truncated(3);
  const Matrix root = metrics::detail::psd_sqrt(truth.matrix(), "truth");
  std::vector<double> dist;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    const TomographyDataset data(3, draw(truth, n, 17 + n));
    const auto r = r_operator(truth, data);
    const Matrix diff = root * (r.r / static_cast<double>(n) - Matrix::Identity(data.dim(), data.dim())) * root;
    Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
    dist.push_back(es.eigenvalues().cwiseAbs().maxCoeff());
  }
  EXPECT_GT(dist[0], dist[1]);
  EXPECT_GT(dist[1], dist[2]);
}

TEST(ROperator, FloorLimit) {
  // Far-tail quadratures have vanishing probability under the vacuum.
  std::vector<QuadratureSample> recs;
  for (int i = 0; i < 150; ++i) recs.push_back({0.01 * i, 0.0, 0.0, 0.0});
  recs.push_back({40.0, 40.0, 0.0, 0.0});
  EXPECT_NO_THROW(r_operator(TwoModeState::vacuum(2), TomographyDataset(2, recs)));
  recs.push_back({41.0, 40.0, 0.0, 0.0});
  EXPECT_THROW(r_operator(TwoModeState::vacuum(2), TomographyDataset(2, recs)), ReconstructionError);
}

TEST(RRhoR, FixedPointOnExactData) {
  // Gauss-Hermite product rule at one phase pair: sum_i w_i Pi_i/p_i = I exactly.
  const auto truth = reference_state(1, 1).truncated(4);
  const auto [x, w] = gauss_hermite(12);
  std::vector<QuadratureSample> recs;
  for (int i = 0; i < x.size(); ++i)
    for (int j = 0; j < x.size(); ++j) {
      const double p = homodyne::joint_probability(truth, x(i), x(j), 0.7, 1.9);
      const double weight = p * w(i) * w(j) * std::exp(x(i) * x(i) + x(j) * x(j));
      recs.push_back({x(i), x(j), 0.7, 1.9, weight});
    }
  const TomographyDataset data(4, recs);
  int repairs = 0;
  const auto next = rrhor_step(truth, data, &repairs);
  EXPECT_LT((next.matrix() - truth.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(next.trace(), 1.0, 1e-12);
  EXPECT_EQ(repairs, 0);
}

TEST(RRhoR, LikelihoodRisesOnVacuumData) {
  const TomographyDataset data(6, draw(TwoModeState::vacuum(6), 10000, 5));
  auto rho = TwoModeState::maximally_mixed(6);
  const double l0 = log_likelihood(rho, data);
  for (int i = 0; i < 10; ++i) {
    rho = rrhor_step(rho, data);
    rho.check_valid(1e-12, 1e-10, 1e-10);
  }
  EXPECT_GE(log_likelihood(rho, data), l0);
}

TEST(Reconstruct, VacuumEndToEnd) {
  const TomographyDataset data(6, draw(TwoModeState::vacuum(6), 10000, 6));
  const auto rep = reconstruct(data);
  // Full-rank MLE of a pure state keeps O(1/sqrt(N)) weight off the vacuum: 0.984 here.
  EXPECT_GT(metrics::uhlmann_fidelity(rep.rho, TwoModeState::vacuum(6)), 0.975);
  rep.rho.check_valid(1e-12, 1e-10, 1e-10);
  EXPECT_EQ(rep.log_likelihood_trace.size(), static_cast<std::size_t>(rep.iterations + 1));
  EXPECT_TRUE(rep.converged);
}

TEST(Reconstruct, PermutationInvariantBitIdentical) {
  auto recs = draw(reference_state(1, 1).truncated(3), 2000, 8);
  const auto a = reconstruct(TomographyDataset(3, recs), {40, 1e-6});
  std::mt19937_64 rng(1);
  std::shuffle(recs.begin(), recs.end(), rng);
  const auto b = reconstruct(TomographyDataset(3, recs), {40, 1e-6});
  EXPECT_EQ(a.rho.matrix(), b.rho.matrix());
  EXPECT_EQ(a.log_likelihood_trace, b.log_likelihood_trace);
}

TEST(Reconstruct, OffLadderElementsSmall) {
  const auto truth = reference_state(1, 1).truncated(4);
  const std::size_t n = 10000;
  const auto rep = reconstruct(TomographyDataset(4, draw(truth, n, 9)), {300, 1e-6});
  double worst = 0.0;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 4; ++b)
      for (int c = 0; c <= 4; ++c)
        for (int e = 0; e <= 4; ++e)
          if (a - b != c - e) worst = std::max(worst, std::abs(rep.rho.element(a, b, c, e)));
  EXPECT_LT(worst, 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Reconstruct, LossyTmsvSelfConsistency) {
  const auto truth = lossy_subtracted_state(SubtractionModel::symmetric(0.3, 0.0, 0.55, 0.5, 0, 0), 6).state;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = reconstruct(TomographyDataset(6, draw(truth, 10000, 10)));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GT(metrics::uhlmann_fidelity(rep.rho, truth), 0.97);
  std::cout << "iterations " << rep.iterations << " bound " << rep.final_bound << " seconds " << secs << "\n";
}

TEST(Reconstruct, RejectsEmpty) {
  EXPECT_THROW(reconstruct(TomographyDataset(2, {})), DomainError);
}

TEST(RollingVariance, VacuumFlatAndWindowCheck) {
  const auto recs = draw(TwoModeState::vacuum(3), 5000, 12);
  const auto curve = rolling_variance(recs, JointQuadrature::sum, 500, 50);
  for (const auto& p : curve) EXPECT_NEAR(p.variance, 0.5, 5 * 0.5 * std::sqrt(2.0 / 499));
  EXPECT_THROW(rolling_variance(recs, JointQuadrature::sum, 6000), DomainError);
}

TEST(RollingVariance, SubtractedStateHasWiderRange) {
  const auto c00 = rolling_variance(draw(reference_state(0, 0), 10000, 13), JointQuadrature::sum, 500, 25);
  const auto c11 = rolling_variance(draw(reference_state(1, 1), 10000, 14), JointQuadrature::sum, 500, 25);
  EXPECT_GT(variance_range_db(c11), variance_range_db(c00));
}
