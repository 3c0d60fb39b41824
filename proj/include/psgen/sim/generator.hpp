#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "psgen/common/random.hpp"
#include "psgen/fock/subtraction.hpp"
#include "psgen/hds/server.hpp"
#include "psgen/hds/word.hpp"
#include "psgen/homodyne/phase_drive.hpp"
#include "psgen/homodyne/sampler.hpp"
#include "psgen/pso/pipeline.hpp"
#include "psgen/sim/config.hpp"

namespace psgen::sim {

/// Earliest herald time generated; below every tick that maps to HDS tick 0.
inline constexpr std::int64_t kFirstHeraldTime = -67;

/// Per-detector dead time in sub-bins (four coarse bins).
inline constexpr std::int64_t kDeadTimeSubbins = 12;

struct HeraldClass {
  int n = 0;
  int m = 0;
  double weight = 0.0;  // p_{n,m} / sum of p over the drawn classes
};

/// Relative herald weights p_{n,m} over 0 <= n, m <= max_photons, excluding (0, 0).
inline std::vector<HeraldClass> herald_classes(const fock::SubtractionModel& model, int max_photons) {
  std::vector<HeraldClass> out;
  double total = 0.0;
  for (int n = 0; n <= max_photons; ++n)
    for (int m = 0; m <= max_photons; ++m) {
      if (n == 0 && m == 0) continue;
      const double p = fock::success_probability(model.with_signature(n, m));
      out.push_back({n, m, p});
      total += p;
    }
  for (auto& c : out) c.weight /= total;
  return out;
}

/// Physics-to-bits generator for both HDS channels and the detector trees.
///
/// Herald time h is the coarse bin of a photon subtraction. The quadrature
/// pair for herald time h lands on HDS-A tick h + delay_a and on HDS-B tick
/// h + delay_b - start_skew (HDS-B's clock starts late by the skew). Every
/// herald time carries one joint draw: vacuum while the shutter is closed,
/// the lossy (0,0) state otherwise, or the lossy (n,m) state for a herald.
/// Dark heralds fire the detectors but keep the (0,0) draw.
class StreamGenerator {
 public:
  explicit StreamGenerator(const ExperimentConfig& cfg)
      : cfg_(cfg),
        rng_(random::derive_seed(cfg.seed, 0x9e4e)),
        classes_(herald_classes(cfg.model, cfg.max_photons)),
        background_(fock::lossy_subtracted_state(cfg.model.with_signature(0, 0), cfg.n_c).state) {
    cfg.validate();
    double acc = 0.0;
    for (const auto& c : classes_) cumulative_.push_back(acc += c.weight);
    last_pulse_.fill(std::numeric_limits<std::int64_t>::min() / 2);
  }

  /// Herald times below `h` see vacuum with no heralds.
  void set_shutter_closed_until(std::int64_t h) { shutter_end_ = h; }

  /// Detector pulses are produced only while enabled (words are always written).
  void set_heralds_enabled(bool on) { heralds_on_ = on; }

  std::int64_t herald_time() const { return h_; }
  std::int64_t tick_a(std::int64_t h) const { return h + cfg_.delay_a; }
  std::int64_t tick_b(std::int64_t h) const { return h + cfg_.delay_b - cfg_.start_skew; }

  /// Generates herald times [h, h + count), writes the words due on both
  /// servers and appends the detector pulses in time order.
  void step(std::int64_t count, hds::HomodyneServer& a, hds::HomodyneServer& b,
            std::vector<pso::DetectorPulse>& pulses) {
    words_a_.clear();
    words_b_.clear();
    std::array<pso::DetectorPulse, 16> local{};
    for (std::int64_t end = h_ + count; h_ < end; ++h_) {
      std::pair<double, double> x;
      const std::int64_t ta = tick_a(h_), tb = tick_b(h_);
      const auto pa = homodyne::phase_at(cfg_.drive_a, ta);
      const auto pb = homodyne::phase_at(cfg_.drive_b, tb);
      if (h_ < shutter_end_) {
        x = {std::sqrt(0.5) * random::normal(rng_), std::sqrt(0.5) * random::normal(rng_)};
      } else if (heralds_on_ && random::uniform01(rng_) < cfg_.herald_rate) {
        const auto& c = draw_class();
        const bool dark = random::uniform01(rng_) < cfg_.dark_fraction;
        ++class_counts_[{c.n, c.m}];
        dark_count_ += dark;
        x = dark ? background_.sample(pa.theta, pb.theta, rng_) : sampler(c.n, c.m).sample(pa.theta, pb.theta, rng_);
        std::size_t k = 0;
        for (int side = 0; side < 2; ++side)
          for (int i = 0; i < (side == 0 ? c.n : c.m); ++i) {
            const std::int64_t sub = 3 * h_ + static_cast<std::int64_t>(random::below(rng_, 3));
            auto& last = last_pulse_[side * 3 + i % 3];
            if (sub - last < kDeadTimeSubbins) {
              ++dead_time_losses_;
              continue;
            }
            last = sub;
            local[k++] = {side, i % 3, sub};
          }
        std::sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(k),
                  [](const auto& p, const auto& q) { return p.subbin < q.subbin; });
        pulses.insert(pulses.end(), local.begin(), local.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        x = background_.sample(pa.theta, pb.theta, rng_);
      }
      if (ta >= 0) words_a_.push_back(hds::make_word(to_code(x.first), pa.adc_code));
      if (tb >= 0) words_b_.push_back(hds::make_word(to_code(x.second), pb.adc_code));
    }
    a.ingest(words_a_);
    b.ingest(words_b_);
  }

  const std::map<std::pair<int, int>, std::uint64_t>& class_counts() const { return class_counts_; }
  std::uint64_t dark_heralds() const { return dark_count_; }
  std::uint64_t dead_time_losses() const { return dead_time_losses_; }
  const std::vector<HeraldClass>& classes() const { return classes_; }

 private:
  int to_code(double x) const { return static_cast<int>(std::lround(x * cfg_.adc_gain)); }

  const HeraldClass& draw_class() {
    const double u = random::uniform01(rng_);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return classes_[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), classes_.size() - 1)];
  }

  const homodyne::GridSampler& sampler(int n, int m) {
    auto& s = samplers_[{n, m}];
    if (!s) {
      const auto st = fock::lossy_subtracted_state(cfg_.model.with_signature(n, m), cfg_.n_c).state;
      s = std::make_unique<homodyne::GridSampler>(st, homodyne::QuadratureGrid{-8.0, 8.0, 0.02});
    }
    return *s;
  }

  ExperimentConfig cfg_;
  random::Engine rng_;
  std::vector<HeraldClass> classes_;
  std::vector<double> cumulative_;
  homodyne::GaussianQuadratureSampler background_;
  std::map<std::pair<int, int>, std::unique_ptr<homodyne::GridSampler>> samplers_;
  std::int64_t h_ = kFirstHeraldTime;
  std::int64_t shutter_end_ = kFirstHeraldTime;
  bool heralds_on_ = true;
  std::array<std::int64_t, 6> last_pulse_{};
  std::vector<std::uint32_t> words_a_, words_b_;
  std::map<std::pair<int, int>, std::uint64_t> class_counts_;
  std::uint64_t dark_count_ = 0;
  std::uint64_t dead_time_losses_ = 0;
};

}  // namespace psgen::sim
