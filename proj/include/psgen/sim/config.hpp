#pragma once

// Experiment configuration. Text form: one "key = value" per line, '#' starts
// a comment, unknown keys are an error. Keys and defaults:
//
//   r = 0.3                  squeezing
//   R1 = 0.14  R2 = 0.14     tap reflectivities
//   eta1 = 0.55  eta2 = 0.50 transmissions after the taps
//   n_c = 6                  Fock cutoff per mode
//   delay_a = 17             true HDS-A delay (coarse bins)
//   delay_b = 23             true HDS-B delay (coarse bins)
//   start_skew = 1           HDS-B clock starts this many bins late (0..2)
//   herald_rate = 0.004      heralds per coarse bin, all subtraction classes
//   dark_fraction = 0.01     heralds whose quadratures come from the (0,0) state
//   max_photons = 2          largest n or m drawn per side
//   adc_gain = 400           ADC codes per quadrature unit
//   ramp_a_hz = 1000  ramp_b_hz = 10000  reset_fraction = 0.001
//   pages = 256  page_words = 1024      simulated HDS geometry
//   hold = 3                 hold time (coarse bins)
//   seed_width = 0  seed_period = 1000  seed_offset = 0
//   target_11 = 10000        records for the one-per-mode dataset
//   target_00 = 10000        zero-detection records
//   shot_noise = 20000       shutter-closed calibration samples
//   seed = 1                 master random seed
//   calib_pulses = 10000     thermal pulses for delay calibration
//   calib_period = 1000      pulse period in coarse bins (100 kHz)
//   calib_width = 5          pulse width in coarse bins
//   calib_amplitude = 8      mean pulse amplitude (quadrature units)
//   calib_click_mean = 0.5   mean detector photon number per pulse
//   calib_dark_rate = 1e-4   detector dark clicks per coarse bin
//   calib_threshold = 3      threshold in vacuum standard deviations

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "psgen/common/error.hpp"
#include "psgen/fock/model.hpp"
#include "psgen/hds/ring_buffer.hpp"
#include "psgen/homodyne/phase_drive.hpp"
#include "psgen/pso/filters.hpp"

namespace psgen::sim {

struct CalibrationConfig {
  std::size_t pulses = 10000;
  std::int64_t period = 1000;
  std::int64_t width = 5;
  double amplitude = 8.0;
  double click_mean = 0.5;
  double dark_rate = 1e-4;
  double threshold_sigmas = 3.0;
};

struct ExperimentConfig {
  fock::SubtractionModel model{0.3, 0.14, 0.14, 0.55, 0.50, 1, 1};
  int n_c = 6;
  std::int64_t delay_a = 17;
  std::int64_t delay_b = 23;
  std::int64_t start_skew = 1;
  double herald_rate = 0.004;
  double dark_fraction = 0.01;
  int max_photons = 2;
  double adc_gain = 400.0;
  homodyne::PhaseDrive drive_a = homodyne::PhaseDrive::side_a();
  homodyne::PhaseDrive drive_b = homodyne::PhaseDrive::side_b();
  hds::Geometry geometry{256, 1024};
  std::int64_t hold = 3;
  pso::SeedWindow seed_window{0, 0, 1000};
  std::size_t target_11 = 10000;
  std::size_t target_00 = 10000;
  std::size_t shot_noise = 20000;
  std::uint64_t seed = 1;
  CalibrationConfig calibration;

  void validate() const {
    model.validate();
    geometry.validate();
    seed_window.validate();
    drive_a.validate();
    drive_b.validate();
    if (n_c < 1) throw DomainError("n_c must be >= 1");
    if (std::abs(delay_a) > 64 || std::abs(delay_b) > 64) throw DomainError("delays must lie within +-64 bins");
    if (start_skew < 0 || start_skew > 2) throw DomainError("start skew must be 0..2 bins");
    if (!(herald_rate >= 0.0 && herald_rate < 0.25)) throw DomainError("herald rate must lie in [0, 0.25)");
    if (!(dark_fraction >= 0.0 && dark_fraction <= 1.0)) throw DomainError("dark fraction must lie in [0, 1]");
    if (max_photons < 1 || max_photons > 7) throw DomainError("max_photons must be 1..7");
    if (!(adc_gain > 0.0)) throw DomainError("ADC gain must be positive");
    if (hold < 0) throw DomainError("hold must be >= 0");
    if (target_11 < 1 || target_00 < 1) throw DomainError("dataset size must be >= 1");
    if (geometry.half() < 4 * 8192) throw DomainError("simulated HDS half must hold at least 32768 words");
    if (calibration.pulses > 0 && calibration.width < 1) throw DomainError("calibration pulse width must be >= 1");
    if (calibration.period <= calibration.width + 128) throw DomainError("calibration period too short");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  std::istringstream is(value);
  const auto num = [&](auto& out) {
    if (!(is >> out) || !(is >> std::ws).eof()) throw FormatError("bad value for " + key + ": " + value);
  };
  if (key == "r") num(c.model.r);
  else if (key == "R1") num(c.model.R1);
  else if (key == "R2") num(c.model.R2);
  else if (key == "eta1") num(c.model.eta1);
  else if (key == "eta2") num(c.model.eta2);
  else if (key == "n_c") num(c.n_c);
  else if (key == "delay_a") num(c.delay_a);
  else if (key == "delay_b") num(c.delay_b);
  else if (key == "start_skew") num(c.start_skew);
  else if (key == "herald_rate") num(c.herald_rate);
  else if (key == "dark_fraction") num(c.dark_fraction);
  else if (key == "max_photons") num(c.max_photons);
  else if (key == "adc_gain") num(c.adc_gain);
  else if (key == "ramp_a_hz") num(c.drive_a.ramp_frequency_hz);
  else if (key == "ramp_b_hz") num(c.drive_b.ramp_frequency_hz);
  else if (key == "reset_fraction") {
    num(c.drive_a.reset_fraction);
    c.drive_b.reset_fraction = c.drive_a.reset_fraction;
  } else if (key == "pages") num(c.geometry.pages);
  else if (key == "page_words") num(c.geometry.page_words);
  else if (key == "hold") num(c.hold);
  else if (key == "seed_width") num(c.seed_window.width);
  else if (key == "seed_period") num(c.seed_window.period);
  else if (key == "seed_offset") num(c.seed_window.offset);
  else if (key == "target_11") num(c.target_11);
  else if (key == "target_00") num(c.target_00);
  else if (key == "shot_noise") num(c.shot_noise);
  else if (key == "seed") num(c.seed);
  else if (key == "calib_pulses") num(c.calibration.pulses);
  else if (key == "calib_period") num(c.calibration.period);
  else if (key == "calib_width") num(c.calibration.width);
  else if (key == "calib_amplitude") num(c.calibration.amplitude);
  else if (key == "calib_click_mean") num(c.calibration.click_mean);
  else if (key == "calib_dark_rate") num(c.calibration.dark_rate);
  else if (key == "calib_threshold") num(c.calibration.threshold_sigmas);
  else throw FormatError("unknown configuration key: " + key);
}

inline ExperimentConfig read_config(std::istream& in, ExperimentConfig c = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path);
  return read_config(in);
}

}  // namespace psgen::sim
