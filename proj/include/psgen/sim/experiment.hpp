#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/common/random.hpp"
#include "psgen/fock/matrix_dump.hpp"
#include "psgen/fock/subtraction.hpp"
#include "psgen/hds/link.hpp"
#include "psgen/hds/server.hpp"
#include "psgen/homodyne/phase_drive.hpp"
#include "psgen/metrics/fidelity.hpp"
#include "psgen/metrics/negativity.hpp"
#include "psgen/metrics/stellar.hpp"
#include "psgen/pso/orchestrator.hpp"
#include "psgen/pso/pipeline.hpp"
#include "psgen/pso/record.hpp"
#include "psgen/sim/calibration.hpp"
#include "psgen/sim/config.hpp"
#include "psgen/sim/generator.hpp"
#include "psgen/tomography/dataset.hpp"
#include "psgen/tomography/mle.hpp"
#include "psgen/tomography/rolling.hpp"

namespace psgen::sim {

/// HDS delays (coarse bins) used by one orchestrator.
struct DelayPair {
  std::int64_t a = 0;
  std::int64_t b = 0;
};

struct Acquisition {
  DelayPair delays;
  std::vector<pso::Record> records_11;
  std::vector<pso::Record> records_00;
  std::vector<pso::Record> shot_noise;
  pso::RunReport report;
};

struct AcquireOptions {
  /// Use loopback TCP links instead of in-process links.
  bool tcp = false;
  /// Also write every kept record to per-class files under this directory.
  std::optional<std::filesystem::path> dataset_dir;
  /// Safety stop in herald time (coarse bins); 0 means derived from the targets.
  std::int64_t max_herald_time = 0;
};

/// File prefix of the shot-noise records in a dataset directory; they carry
/// the all-zero signature like zero-detection records.
inline const std::string kShotNoisePrefix = "shotnoise_";

/// Zero-detection rate per overflow period that yields about target_00
/// samples while the one-per-mode dataset fills.
inline std::uint64_t planned_zero_rate(const ExperimentConfig& cfg, double expected_span) {
  const double periods = expected_span / static_cast<double>(cfg.geometry.capacity());
  const double rate = std::ceil(1.3 * static_cast<double>(cfg.target_00) / std::max(periods, 1e-9));
  return static_cast<std::uint64_t>(std::clamp(rate, 1.0, static_cast<double>(pso::kMaxZeroDetectionRate)));
}

/// Expected herald time needed to fill the [1,1] dataset.
inline double expected_span(const ExperimentConfig& cfg) {
  double w11 = 0.0;
  for (const auto& c : herald_classes(cfg.model, cfg.max_photons))
    if (c.n == 1 && c.m == 1) w11 = c.weight;
  const double survive = std::exp(-2.0 * cfg.herald_rate * static_cast<double>(cfg.hold));
  return static_cast<double>(cfg.target_11) / (cfg.herald_rate * w11 * survive);
}

/// Generates one stream and acquires it with one orchestrator per delay pair.
///
/// Order of a run: both servers are filled with shutter-closed vacuum until
/// the first half seals, each orchestrator collects shot-noise records there,
/// then the shutter opens and heralds flow until every orchestrator holds
/// target_11 one-per-mode records and target_00 zero-detection records.
inline std::vector<Acquisition> acquire(const ExperimentConfig& cfg, const std::vector<DelayPair>& delays,
                                        const AcquireOptions& opt = {}) {
  cfg.validate();
  if (delays.empty()) throw DomainError("acquire needs at least one delay pair");
  hds::HomodyneServer sa(cfg.geometry, random::derive_seed(cfg.seed, 1));
  hds::HomodyneServer sb(cfg.geometry, random::derive_seed(cfg.seed, 2));
  const std::uint32_t cap = sa.capacity();
  const std::int64_t half = cap / 2;

  std::unique_ptr<hds::TcpServer> tcp_a, tcp_b;
  if (opt.tcp) {
    tcp_a = std::make_unique<hds::TcpServer>(sa, "hds-a");
    tcp_b = std::make_unique<hds::TcpServer>(sb, "hds-b");
    tcp_a->start(0, 0);
    tcp_b->start(0, 0);
  }

  const double span = expected_span(cfg);
  const std::uint64_t zdr = planned_zero_rate(cfg, span);
  const std::int64_t limit = opt.max_herald_time > 0 ? opt.max_herald_time
                                                     : static_cast<std::int64_t>(4.0 * span) + 4 * cap;

  struct Lane {
    std::unique_ptr<hds::Link> la, lb;
    std::unique_ptr<pso::SharedSettings> settings;
    std::unique_ptr<pso::Orchestrator> orch;
    std::unique_ptr<pso::DatasetWriter> writer;
    Acquisition acq;
  };
  std::vector<std::unique_ptr<Lane>> lanes;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    auto lane = std::make_unique<Lane>();
    Lane* l = lane.get();
    if (opt.tcp) {
      l->la = std::make_unique<hds::TcpLink>("127.0.0.1", tcp_a->data_port(), tcp_a->control_port());
      l->lb = std::make_unique<hds::TcpLink>("127.0.0.1", tcp_b->data_port(), tcp_b->control_port());
    } else {
      l->la = std::make_unique<hds::DirectLink>(sa, "hds-a");
      l->lb = std::make_unique<hds::DirectLink>(sb, "hds-b");
    }
    if (i == 0)
      for (auto* link : {l->la.get(), l->lb.get()})
        if (link->control("CONF:SLOPE ON") != "OK") throw AcquisitionError("cannot enable the slope check");
    pso::RunSettings rs;
    rs.delay_a = delays[i].a;
    rs.delay_b = delays[i].b;
    rs.hold = cfg.hold;
    rs.seed = cfg.seed_window;
    rs.mode = pso::CaptureMode::coincidence;
    rs.zdr_rate = zdr;
    l->settings = std::make_unique<pso::SharedSettings>(rs);
    l->acq.delays = delays[i];
    if (opt.dataset_dir) {
      const auto dir = delays.size() == 1 ? *opt.dataset_dir
                                          : *opt.dataset_dir / ("delay_" + std::to_string(delays[i].a) + "_" +
                                                                std::to_string(delays[i].b));
      l->writer = std::make_unique<pso::DatasetWriter>(dir);
    }
    l->orch = std::make_unique<pso::Orchestrator>(*l->la, *l->lb, cap, *l->settings, [l, &cfg](const pso::Record& r) {
      const auto k = r.signature.klass();
      if (k == pso::SignatureClass{1, 1} && l->acq.records_11.size() < cfg.target_11) l->acq.records_11.push_back(r);
      if (k == pso::SignatureClass{0, 0} && l->acq.records_00.size() < cfg.target_00) l->acq.records_00.push_back(r);
      if (l->writer) l->writer->write(r);
    });
    l->orch->handshake();
    lanes.push_back(std::move(lane));
  }

  StreamGenerator gen(cfg);
  const std::int64_t open_at = half + 2 * kMaxLag;
  gen.set_shutter_closed_until(open_at);
  const std::int64_t block = 8192;
  std::vector<pso::DetectorPulse> pulses;
  // Every tick of the first half comes from a herald time before open_at.
  while (gen.herald_time() < open_at) gen.step(std::min(block, open_at - gen.herald_time()), sa, sb, pulses);
  random::Engine noise_rng(random::derive_seed(cfg.seed, 0x5407));
  for (auto& l : lanes) {
    l->acq.shot_noise = l->orch->shot_noise(cfg.shot_noise, noise_rng);
    if (l->writer) {
      pso::DatasetWriter vacuum(l->writer->directory(), 10000, kShotNoisePrefix);
      for (const auto& r : l->acq.shot_noise) vacuum.write(r);
      vacuum.close();
    }
  }
  pulses.clear();

  pso::CoincidencePipeline pipe;
  const auto done = [&] {
    return std::all_of(lanes.begin(), lanes.end(), [&](const auto& l) {
      return l->acq.records_11.size() >= cfg.target_11 && l->acq.records_00.size() >= cfg.target_00;
    });
  };
  while (!done()) {
    if (gen.herald_time() > limit) throw AcquisitionError("acquisition did not reach its dataset targets");
    pulses.clear();
    gen.step(block, sa, sb, pulses);
    pipe.push(pulses);
    pipe.advance_to(3 * gen.herald_time() - 1);
    const auto events = pipe.take();
    for (auto& l : lanes) {
      l->orch->submit(events);
      l->orch->service();
    }
  }
  // Stop heralding, release held events and drain what is still pending.
  gen.set_heralds_enabled(false);
  pipe.flush();
  const auto tail = pipe.take();
  for (auto& l : lanes) {
    l->orch->submit(tail);
    l->orch->finish_events(gen.herald_time());
    l->orch->service();
  }
  for (int i = 0; i < 8 && std::any_of(lanes.begin(), lanes.end(), [](const auto& l) { return l->orch->pending() > 0; });
       ++i) {
    for (std::int64_t k = 0; k < half / block; ++k) gen.step(block, sa, sb, pulses);
    for (auto& l : lanes) l->orch->service();
  }
  std::vector<Acquisition> out;
  for (auto& l : lanes) {
    l->orch->abandon_pending();
    l->acq.report = l->orch->report();
    if (l->writer) {
      l->writer->close();
      std::ofstream meta(l->writer->directory() / "run_metadata.txt");
      meta << "delay_a " << l->acq.delays.a << "\ndelay_b " << l->acq.delays.b << "\nzero_rate " << zdr
           << "\nseed " << cfg.seed << "\nmodel " << cfg.model.describe() << "\n";
      pso::write_report(meta, l->acq.report);
    }
    out.push_back(std::move(l->acq));
  }
  if (tcp_a) tcp_a->stop();
  if (tcp_b) tcp_b->stop();
  return out;
}

/// Per-channel factor from ADC codes to quadrature units: vacuum variance 1/2.
struct ShotNoiseScale {
  double a = 1.0;
  double b = 1.0;
};

inline ShotNoiseScale shot_noise_scale(const std::vector<pso::Record>& vacuum) {
  if (vacuum.size() < 2) throw AcquisitionError("too few shot-noise records");
  const auto var = [&](int idx) {
    double m = 0.0, ss = 0.0;
    for (const auto& r : vacuum) m += r.adc[idx];
    m /= static_cast<double>(vacuum.size());
    for (const auto& r : vacuum) ss += (r.adc[idx] - m) * (r.adc[idx] - m);
    return ss / static_cast<double>(vacuum.size() - 1);
  };
  return {std::sqrt(0.5 / var(0)), std::sqrt(0.5 / var(2))};
}

inline tomography::TomographyDataset to_dataset(const std::vector<pso::Record>& records, const ShotNoiseScale& s,
                                                int n_c) {
  std::vector<tomography::QuadratureSample> out;
  out.reserve(records.size());
  for (const auto& r : records)
    out.push_back({r.adc[0] * s.a, r.adc[2] * s.b, homodyne::code_to_phase(r.adc[1]),
                   homodyne::code_to_phase(r.adc[3]), 1.0});
  return tomography::TomographyDataset(n_c, std::move(out));
}

struct Targets {
  fock::TwoModeState e00;
  fock::TwoModeState e11;
};

inline Targets target_states(const ExperimentConfig& cfg) {
  return {fock::lossy_subtracted_state(cfg.model.with_signature(0, 0), cfg.n_c).state,
          fock::lossy_subtracted_state(cfg.model.with_signature(1, 1), cfg.n_c).state};
}

struct ExperimentReport {
  CalibrationResult calibration;
  Acquisition acquisition;
  ShotNoiseScale scale;
  tomography::ReconstructionReport rec_00;
  tomography::ReconstructionReport rec_11;
  Targets targets;
  double f11_vs_e11 = 0.0;
  double f11_vs_e00 = 0.0;
  double f00_vs_e00 = 0.0;
  double f00_vs_e11 = 0.0;
  double en_rec_00 = 0.0;
  double en_rec_11 = 0.0;
  double en_target_00 = 0.0;
  double en_target_11 = 0.0;
  metrics::WitnessResult witness_target_11;
  metrics::WitnessResult witness_rec_11;
  std::vector<tomography::RollingPoint> rolling_00_sum, rolling_11_sum;
};

struct RunOptions {
  /// Skip calibration and use these delays.
  std::optional<DelayPair> delays;
  AcquireOptions acquire;
  tomography::ReconstructionOptions mle;
};

/// Shot-noise calibration, delay calibration, acquisition and tomography of
/// the [0,0] and [1,1] datasets, with fidelities, negativities and witnesses.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  ExperimentReport rep;
  DelayPair d;
  if (opt.delays) {
    d = *opt.delays;
  } else {
    rep.calibration = thermal_calibration(cfg);
    d = {rep.calibration.a.delay, rep.calibration.b.delay};
  }
  rep.acquisition = std::move(acquire(cfg, {d}, opt.acquire).front());
  rep.scale = shot_noise_scale(rep.acquisition.shot_noise);
  const auto ds00 = to_dataset(rep.acquisition.records_00, rep.scale, cfg.n_c);
  const auto ds11 = to_dataset(rep.acquisition.records_11, rep.scale, cfg.n_c);
  rep.rec_00 = tomography::reconstruct(ds00, opt.mle);
  rep.rec_11 = tomography::reconstruct(ds11, opt.mle);
  rep.targets = target_states(cfg);
  rep.f11_vs_e11 = metrics::uhlmann_fidelity(rep.rec_11.rho, rep.targets.e11);
  rep.f11_vs_e00 = metrics::uhlmann_fidelity(rep.rec_11.rho, rep.targets.e00);
  rep.f00_vs_e00 = metrics::uhlmann_fidelity(rep.rec_00.rho, rep.targets.e00);
  rep.f00_vs_e11 = metrics::uhlmann_fidelity(rep.rec_00.rho, rep.targets.e11);
  rep.en_rec_00 = metrics::log_negativity(rep.rec_00.rho);
  rep.en_rec_11 = metrics::log_negativity(rep.rec_11.rho);
  rep.en_target_00 = metrics::log_negativity(rep.targets.e00);
  rep.en_target_11 = metrics::log_negativity(rep.targets.e11);
  rep.witness_target_11 = metrics::witness(rep.targets.e11);
  rep.witness_rec_11 = metrics::witness(rep.rec_11.rho);
  const std::size_t window = std::min<std::size_t>(500, std::min(ds00.size(), ds11.size()));
  if (window >= 2) {
    rep.rolling_00_sum = tomography::rolling_variance(ds00.records(), tomography::JointQuadrature::sum, window, 50);
    rep.rolling_11_sum = tomography::rolling_variance(ds11.records(), tomography::JointQuadrature::sum, window, 50);
  }
  return rep;
}

inline void write_experiment_report(std::ostream& os, const ExperimentReport& r) {
  os << "# calibration\n"
     << "delay_a " << r.calibration.a.delay << " snr_a " << r.calibration.a.snr << " fwhm_a " << r.calibration.a.fwhm
     << '\n'
     << "delay_b " << r.calibration.b.delay << " snr_b " << r.calibration.b.snr << " fwhm_b " << r.calibration.b.fwhm
     << '\n'
     << "# acquisition (delays " << r.acquisition.delays.a << ", " << r.acquisition.delays.b << ")\n";
  pso::write_report(os, r.acquisition.report);
  os << "scale_a " << r.scale.a << "\nscale_b " << r.scale.b << '\n'
     << "# tomography\n"
     << "records_00 " << r.rec_00.records << " iterations " << r.rec_00.iterations << " converged "
     << r.rec_00.converged << '\n'
     << "records_11 " << r.rec_11.records << " iterations " << r.rec_11.iterations << " converged "
     << r.rec_11.converged << '\n'
     << "# fidelity table: rows reconstructed, columns target\n"
     << "          E00       E11\n"
     << "rec00  " << r.f00_vs_e00 << "  " << r.f00_vs_e11 << '\n'
     << "rec11  " << r.f11_vs_e00 << "  " << r.f11_vs_e11 << '\n'
     << "# log negativity\n"
     << "rec00 " << r.en_rec_00 << " target00 " << r.en_target_00 << '\n'
     << "rec11 " << r.en_rec_11 << " target11 " << r.en_target_11 << '\n'
     << "# stellar witness (fidelity with |1,1>)\n"
     << "target11 " << r.witness_target_11.fidelity_11 << ' ' << metrics::to_string(r.witness_target_11.rank_class)
     << '\n'
     << "rec11 " << r.witness_rec_11.fidelity_11 << ' ' << metrics::to_string(r.witness_rec_11.rank_class) << '\n';
  if (!r.rolling_00_sum.empty())
    os << "rolling_range_db rec00 " << tomography::variance_range_db(r.rolling_00_sum) << " rec11 "
       << tomography::variance_range_db(r.rolling_11_sum) << '\n';
}

/// Writes the report text, rolling-variance curves and density-matrix dumps.
inline void save_experiment(const std::filesystem::path& dir, const ExperimentReport& r) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.txt") << [&] {
    std::ostringstream os;
    write_experiment_report(os, r);
    return os.str();
  }();
  fock::save_binary((dir / "rho_00.psdm").string(), r.rec_00.rho);
  fock::save_binary((dir / "rho_11.psdm").string(), r.rec_11.rho);
  std::ofstream rv(dir / "rolling_variance.csv");
  rv << "dataset,phase,variance\n";
  for (const auto& p : r.rolling_00_sum) rv << "00," << p.phase << ',' << p.variance << '\n';
  for (const auto& p : r.rolling_11_sum) rv << "11," << p.phase << ',' << p.variance << '\n';
}

struct ScanRow {
  std::int64_t i = 0;  // offset added to delay_a
  std::int64_t j = 0;  // offset added to delay_b
  double en = 0.0;     // E_N of the reconstructed [1,1] dataset
  double f_e11 = 0.0;
  double f_e00 = 0.0;
  std::size_t records = 0;
};

/// Acquires the same stream at nominal + (i, j) for every offset pair and
/// reconstructs the [1,1] dataset of each.
inline std::vector<ScanRow> delay_scan(const ExperimentConfig& cfg, DelayPair nominal,
                                       const std::vector<std::pair<std::int64_t, std::int64_t>>& offsets,
                                       const tomography::ReconstructionOptions& mle = {}) {
  std::vector<DelayPair> pairs;
  for (const auto& [i, j] : offsets) pairs.push_back({nominal.a + i, nominal.b + j});
  const auto acqs = acquire(cfg, pairs);
  const auto targets = target_states(cfg);
  std::vector<ScanRow> rows;
  for (std::size_t k = 0; k < acqs.size(); ++k) {
    const auto scale = shot_noise_scale(acqs[k].shot_noise);
    const auto rec = tomography::reconstruct(to_dataset(acqs[k].records_11, scale, cfg.n_c), mle);
    rows.push_back({offsets[k].first, offsets[k].second, metrics::log_negativity(rec.rho),
                    metrics::uhlmann_fidelity(rec.rho, targets.e11), metrics::uhlmann_fidelity(rec.rho, targets.e00),
                    acqs[k].records_11.size()});
  }
  return rows;
}

inline void write_scan_table(std::ostream& os, const std::vector<ScanRow>& rows) {
  os << "i,j,records,E_N,F_E11,F_E00\n";
  for (const auto& r : rows)
    os << r.i << ',' << r.j << ',' << r.records << ',' << r.en << ',' << r.f_e11 << ',' << r.f_e00 << '\n';
}

}  // namespace psgen::sim
