#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/common/random.hpp"
#include "psgen/hds/control.hpp"
#include "psgen/hds/link.hpp"
#include "psgen/hds/server.hpp"
#include "psgen/homodyne/phase_drive.hpp"
#include "psgen/pso/pipeline.hpp"
#include "psgen/sim/config.hpp"
#include "psgen/sim/generator.hpp"

namespace psgen::sim {

inline constexpr std::int64_t kMaxLag = 64;
inline constexpr double kMinCalibrationSnr = 5.0;
inline constexpr double kMinPeakCounts = 10.0;

struct PeakEstimate {
  std::int64_t delay = 0;  // HDS delay to use for this mode, coarse bins
  double center = 0.0;     // centroid of the correlation peak
  double snr = 0.0;        // peak height over the off-peak mean
  double fwhm = 0.0;       // bins above half maximum
  std::vector<std::uint64_t> histogram;  // lags -64..64
};

struct CalibrationResult {
  PeakEstimate a;
  PeakEstimate b;
  std::uint64_t pulses = 0;
  std::uint64_t clicks_a = 0;
  std::uint64_t clicks_b = 0;
};

/// Histogram of crossing - click over lags [-64, 64]; both inputs ascending.
inline std::vector<std::uint64_t> cross_correlate(const std::vector<std::int64_t>& clicks,
                                                  const std::vector<std::int64_t>& crossings) {
  std::vector<std::uint64_t> h(2 * kMaxLag + 1, 0);
  std::size_t lo = 0;
  for (auto c : clicks) {
    while (lo < crossings.size() && crossings[lo] < c - kMaxLag) ++lo;
    for (std::size_t j = lo; j < crossings.size() && crossings[j] <= c + kMaxLag; ++j)
      ++h[static_cast<std::size_t>(crossings[j] - c + kMaxLag)];
  }
  return h;
}

/// Locates the correlation peak. A click sits uniformly inside a pulse of
/// `pulse_width` bins while the crossing marks the pulse start, so the peak
/// spans lags delay - (width - 1) .. delay and its center is shifted back by
/// (width - 1) / 2.
inline PeakEstimate analyse_peak(const std::vector<std::uint64_t>& h, std::int64_t pulse_width) {
  PeakEstimate e;
  e.histogram = h;
  const auto top = std::max_element(h.begin(), h.end());
  const auto peak_idx = static_cast<std::int64_t>(top - h.begin());
  const double peak = static_cast<double>(*top);
  double off = 0.0;
  std::size_t off_bins = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (std::abs(static_cast<std::int64_t>(i) - peak_idx) > 2 * pulse_width + 2) {
      off += static_cast<double>(h[i]);
      ++off_bins;
    }
  const double base = off_bins ? off / static_cast<double>(off_bins) : 0.0;
  e.snr = base > 0.0 ? peak / base : (peak > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  if (peak < kMinPeakCounts) throw CalibrationError("calibration failed: fewer than 10 coincidences in the peak");
  if (e.snr < kMinCalibrationSnr)
    throw CalibrationError("calibration failed: correlation SNR " + std::to_string(e.snr) + " below 5");
  const double half = base + 0.5 * (peak - base);
  std::int64_t l = peak_idx, r = peak_idx;
  while (l > 0 && static_cast<double>(h[l - 1]) > half) --l;
  while (r + 1 < static_cast<std::int64_t>(h.size()) && static_cast<double>(h[r + 1]) > half) ++r;
  e.fwhm = static_cast<double>(r - l + 1);
  double w = 0.0, m = 0.0;
  for (std::int64_t i = l; i <= r; ++i) {
    const double v = static_cast<double>(h[i]) - base;
    w += v;
    m += v * static_cast<double>(i - kMaxLag);
  }
  e.center = m / w;
  e.delay = std::llround(e.center + 0.5 * static_cast<double>(pulse_width - 1));
  return e;
}

/// Thermal-pulse delay calibration.
///
/// Bright thermal pulses of calib_width bins repeat every calib_period bins.
/// Each HDS channel sees the pulse amplitude (sqrt of an exponential
/// intensity) on top of vacuum noise, delayed like the quantum signal; each
/// detector side clicks with probability 1 - exp(-click_mean * I) at a
/// uniform position inside the pulse, plus dark clicks. The HDS threshold
/// scan yields rising crossings; crossings minus click timetags are
/// histogrammed over +-64 bins per mode.
inline CalibrationResult thermal_calibration(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& cc = cfg.calibration;
  random::Engine rng(random::derive_seed(cfg.seed, 0xca1));
  hds::HomodyneServer sa(cfg.geometry, random::derive_seed(cfg.seed, 1)), sb(cfg.geometry, random::derive_seed(cfg.seed, 2));
  hds::DirectLink la(sa, "hds-a"), lb(sb, "hds-b");
  const int thr = static_cast<int>(std::lround(cc.threshold_sigmas * std::sqrt(0.5) * cfg.adc_gain));
  for (auto* l : {&la, &lb}) {
    if (l->control("CONF:THR " + std::to_string(thr)) != "OK" || l->control("CONF:THRSLOPE POS") != "OK")
      throw AcquisitionError("cannot configure the threshold scan");
  }
  const std::uint32_t cap = sa.capacity();
  const std::int64_t first_pulse = 200;
  const std::int64_t end = first_pulse + static_cast<std::int64_t>(cc.pulses) * cc.period + 2 * kMaxLag;
  std::vector<pso::DetectorPulse> pulses_a, pulses_b, carry_a, carry_b;
  pso::CoincidencePipeline pipe_a, pipe_b;
  std::vector<std::int64_t> clicks_a, clicks_b, cross_a, cross_b;
  std::vector<std::uint32_t> wa, wb;
  std::int64_t h = kFirstHeraldTime;
  double intensity = 0.0;
  std::int64_t scanned_a = 0, scanned_b = 0;  // absolute end of the last scanned half

  const auto scan = [&](hds::Link& link, std::int64_t& scanned, std::vector<std::int64_t>& out) {
    const auto st = link.status();
    const std::int64_t sealed_end =
        static_cast<std::int64_t>(st.overflow) * cap + (st.current_timetag >= cap / 2 ? cap / 2 : 0);
    if (sealed_end <= scanned) return;
    const std::int64_t lo = sealed_end - cap / 2;
    const auto q = static_cast<std::uint32_t>(lo / cap);
    const auto b = static_cast<std::uint32_t>(lo % cap);
    const std::string reply = link.control("SCAN? " + std::to_string(q) + " " + std::to_string(b) + " " +
                                           std::to_string(b + cap / 2));
    for (auto t : hds::parse_scan_reply(reply)) out.push_back(static_cast<std::int64_t>(q) * cap + t);
    scanned = sealed_end;
  };

  CalibrationResult res;
  const std::int64_t block = 8192;
  // Runs past the last pulse until both halves holding it are sealed and scanned.
  while (scanned_a < end + 64 + cap / 2 || scanned_b < end + 64 + cap / 2) {
    wa.clear();
    wb.clear();
    pulses_a.clear();
    pulses_b.clear();
    for (std::int64_t stop = h + block; h < stop; ++h) {
      const std::int64_t rel = h - first_pulse;
      const bool live = rel >= 0 && h < end - 2 * kMaxLag && cc.pulses > 0;
      const std::int64_t phase = live ? rel % cc.period : -1;
      double amp = 0.0;
      if (phase == 0) {
        intensity = random::exponential(rng, 1.0);
        ++res.pulses;
        for (int side = 0; side < 2; ++side) {
          const double p_click = 1.0 - std::exp(-cc.click_mean * intensity);
          if (random::uniform01(rng) < p_click) {
            const std::int64_t bin = h + static_cast<std::int64_t>(random::below(rng, cc.width));
            const std::int64_t sub = 3 * bin + static_cast<std::int64_t>(random::below(rng, 3));
            (side == 0 ? pulses_a : pulses_b).push_back({side, 0, sub});
          }
        }
      }
      if (phase >= 0 && phase < cc.width) amp = cc.amplitude * std::sqrt(intensity);
      for (int side = 0; side < 2; ++side)
        if (h >= 0 && random::uniform01(rng) < cc.dark_rate)
          (side == 0 ? pulses_a : pulses_b).push_back({side, 1, 3 * h + static_cast<std::int64_t>(random::below(rng, 3))});
      const double xa = amp + std::sqrt(0.5) * random::normal(rng);
      const double xb = amp + std::sqrt(0.5) * random::normal(rng);
      const std::int64_t ta = h + cfg.delay_a, tb = h + cfg.delay_b - cfg.start_skew;
      if (ta >= 0)
        wa.push_back(hds::make_word(static_cast<int>(std::lround(xa * cfg.adc_gain)),
                                    homodyne::phase_at(cfg.drive_a, ta).adc_code));
      if (tb >= 0)
        wb.push_back(hds::make_word(static_cast<int>(std::lround(xb * cfg.adc_gain)),
                                    homodyne::phase_at(cfg.drive_b, tb).adc_code));
    }
    // Clicks late in a pulse may fall past the block; they wait for the next one.
    const auto feed = [&](std::vector<pso::DetectorPulse>& ps, std::vector<pso::DetectorPulse>& carry,
                          pso::CoincidencePipeline& pipe) {
      ps.insert(ps.end(), carry.begin(), carry.end());
      carry.clear();
      std::sort(ps.begin(), ps.end(), [](const auto& p, const auto& q) { return p.subbin < q.subbin; });
      for (const auto& p : ps) {
        if (p.subbin < 3 * h) pipe.push(p);
        else carry.push_back(p);
      }
    };
    feed(pulses_a, carry_a, pipe_a);
    feed(pulses_b, carry_b, pipe_b);
    pipe_a.advance_to(3 * h - 1);
    pipe_b.advance_to(3 * h - 1);
    for (const auto& e : pipe_a.take()) clicks_a.push_back(e.coarse);
    for (const auto& e : pipe_b.take()) clicks_b.push_back(e.coarse);
    sa.ingest(wa);
    sb.ingest(wb);
    scan(la, scanned_a, cross_a);
    scan(lb, scanned_b, cross_b);
  }
  res.clicks_a = clicks_a.size();
  res.clicks_b = clicks_b.size();
  res.a = analyse_peak(cross_correlate(clicks_a, cross_a), cc.width);
  res.b = analyse_peak(cross_correlate(clicks_b, cross_b), cc.width);
  return res;
}

}  // namespace psgen::sim
