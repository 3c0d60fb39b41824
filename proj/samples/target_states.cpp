// Prints the lossy target states' figures of merit and a short simulated
// tomography of the one-photon-per-mode state.
//
//   psgen_sample_targets [records]

#include <cstdlib>
#include <iostream>

#include "psgen/fock/subtraction.hpp"
#include "psgen/homodyne/phase_drive.hpp"
#include "psgen/homodyne/sampler.hpp"
#include "psgen/metrics/fidelity.hpp"
#include "psgen/metrics/negativity.hpp"
#include "psgen/metrics/stellar.hpp"
#include "psgen/tomography/mle.hpp"

using namespace psgen;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  const auto model = fock::SubtractionModel::symmetric(0.3, 0.14, 0.55, 0.50, 1, 1);
  const auto e11 = fock::lossy_subtracted_state(model, 6).state;
  const auto e00 = fock::lossy_subtracted_state(model.with_signature(0, 0), 6).state;
  std::cout << "lambda " << model.lambda() << "\np11 " << fock::success_probability(model) << "\nE_N(E00) "
            << metrics::log_negativity(e00) << "\nE_N(E11) " << metrics::log_negativity(e11) << "\nwitness(E11) "
            << metrics::witness(e11).fidelity_11 << '\n';

  // Draw quadratures at ramp phases and reconstruct.
  random::Engine rng(3);
  homodyne::GridSampler sampler(e11, homodyne::QuadratureGrid{-8.0, 8.0, 0.02});
  const auto da = homodyne::PhaseDrive::side_a();
  const auto db = homodyne::PhaseDrive::side_b();
  std::vector<tomography::QuadratureSample> samples;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::int64_t>(random::below(rng, 100000000));
    const double th1 = homodyne::phase_at(da, t).theta, th2 = homodyne::phase_at(db, t).theta;
    const auto [x1, x2] = sampler.sample(th1, th2, rng);
    samples.push_back({x1, x2, th1, th2, 1.0});
  }
  const auto rec = tomography::reconstruct(tomography::TomographyDataset(6, std::move(samples)));
  std::cout << "records " << n << "\niterations " << rec.iterations << "\nF(rec, E11) "
            << metrics::uhlmann_fidelity(rec.rho, e11) << "\nE_N(rec) " << metrics::log_negativity(rec.rho) << '\n';
}
