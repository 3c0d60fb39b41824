#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "psgen/fock/matrix_dump.hpp"
#include "psgen/fock/subtraction.hpp"
#include "psgen/hds/link.hpp"
#include "psgen/hds/server.hpp"
#include "psgen/hds/test_vector.hpp"
#include "psgen/metrics/fidelity.hpp"
#include "psgen/metrics/negativity.hpp"
#include "psgen/metrics/stellar.hpp"
#include "psgen/pso/record.hpp"
#include "psgen/sim/calibration.hpp"
#include "psgen/sim/config.hpp"
#include "psgen/sim/experiment.hpp"
#include "psgen/sim/throughput.hpp"

namespace fs = std::filesystem;
using namespace psgen;

namespace {

sim::ExperimentConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
  sim::ExperimentConfig c = path.empty() ? sim::ExperimentConfig{} : sim::load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FormatError("override must be key=value: " + kv);
    sim::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

std::pair<std::int64_t, std::int64_t> parse_pair(const std::string& s) {
  std::int64_t a = 0, b = 0;
  char comma = 0;
  std::istringstream is(s);
  if (!(is >> a >> comma >> b) || comma != ',' || !(is >> std::ws).eof()) throw FormatError("expected a,b: " + s);
  return {a, b};
}

void print_peak(const char* side, const sim::PeakEstimate& e) {
  std::cout << side << " delay " << e.delay << " center " << e.center << " snr " << e.snr << " fwhm " << e.fwhm
            << '\n';
}

void write_histograms(const fs::path& path, const sim::CalibrationResult& r) {
  std::ofstream os(path);
  os << "lag,count_a,count_b\n";
  for (std::size_t i = 0; i < r.a.histogram.size(); ++i)
    os << static_cast<std::int64_t>(i) - sim::kMaxLag << ',' << r.a.histogram[i] << ',' << r.b.histogram[i] << '\n';
}

void print_state_summary(const fock::TwoModeState& rho, const sim::Targets& t) {
  const auto w = metrics::witness(rho);
  std::cout << "E_N " << metrics::log_negativity(rho) << '\n'
            << "F_E00 " << metrics::uhlmann_fidelity(rho, t.e00) << '\n'
            << "F_E11 " << metrics::uhlmann_fidelity(rho, t.e11) << '\n'
            << "witness " << w.fidelity_11 << ' ' << metrics::to_string(w.rank_class) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon-subtracted state generation: simulation, acquisition and tomography"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "override one setting, key=value");
  };

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "thermal-pulse delay calibration");
  add_config(cal);
  std::string hist_out;
  cal->add_option("--histogram", hist_out, "write both correlation histograms as CSV");

  // acquire
  auto* acq = app.add_subcommand("acquire", "simulate and acquire per-class datasets");
  add_config(acq);
  std::string out_dir = "dataset";
  std::string delays_arg;
  bool use_tcp = false;
  acq->add_option("-o,--out", out_dir, "dataset directory");
  acq->add_option("--delays", delays_arg, "HDS delays a,b (default: calibrate first)");
  acq->add_flag("--tcp", use_tcp, "talk to the HDS servers over loopback TCP");

  // run: calibrate, acquire and reconstruct in one go
  auto* run = app.add_subcommand("run", "full experiment: calibration, acquisition, tomography, report");
  add_config(run);
  std::string run_out = "run";
  run->add_option("-o,--out", run_out, "output directory");
  run->add_option("--delays", delays_arg, "HDS delays a,b (default: calibrate first)");
  run->add_flag("--tcp", use_tcp, "talk to the HDS servers over loopback TCP");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "maximum-likelihood tomography of one dataset class");
  add_config(rec);
  std::string dataset_dir, class_arg = "1,1", rho_out, json_out;
  int max_iter = tomography::kDefaultMaxIterations;
  double eps = tomography::kDefaultEpsilon;
  rec->add_option("-d,--dataset", dataset_dir, "dataset directory written by acquire")->required();
  rec->add_option("--class", class_arg, "signature class n,m");
  rec->add_option("-o,--out", rho_out, "binary density-matrix dump");
  rec->add_option("--json", json_out, "JSON density-matrix dump");
  rec->add_option("--max-iterations", max_iter);
  rec->add_option("--epsilon", eps);

  // scan-delays
  auto* scan = app.add_subcommand("scan-delays", "acquire and reconstruct on a grid of delay offsets");
  add_config(scan);
  int radius = 1;
  std::string scan_out;
  scan->add_option("--radius", radius, "offsets -radius..radius on each side")->check(CLI::Range(0, 8));
  scan->add_option("--delays", delays_arg, "nominal delays a,b (default: calibrate first)");
  scan->add_option("-o,--out", scan_out, "CSV output (default stdout)");

  // witness
  auto* wit = app.add_subcommand("witness", "stellar-rank witness of a state");
  add_config(wit);
  std::string state_path, sig_arg = "1,1";
  bool lossless = false;
  wit->add_option("--state", state_path, "binary density-matrix dump (default: model state from the config)");
  wit->add_option("--signature", sig_arg, "subtraction signature n,m of the model state");
  wit->add_flag("--lossless", lossless, "use eta = 1 for the model state");

  // contours
  auto* con = app.add_subcommand("contours", "F_nn(lambda, eta) table and threshold summary");
  int con_n = 1, con_points = 101;
  con->add_option("-n", con_n, "photons subtracted per mode")->check(CLI::Range(0, 2));
  con->add_option("--points", con_points, "grid points per axis")->check(CLI::Range(2, 2001));
  bool summary_only = false;
  con->add_flag("--summary", summary_only, "print only maxima and minimal transmissivities");

  // protocol-test
  auto* proto = app.add_subcommand("protocol-test", "HDS conformance replay and loopback soak");
  std::string vector_in, vector_out;
  double soak_seconds = 0.0;
  bool proto_tcp = false;
  proto->add_option("--vector", vector_in, "test vector to replay and verify")->check(CLI::ExistingFile);
  proto->add_option("--write-vector", vector_out, "write a 16384-word ramp vector and exit");
  proto->add_flag("--tcp", proto_tcp, "verify over loopback TCP");
  proto->add_option("--soak", soak_seconds, "run the full-size throughput soak for this many seconds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cal) {
      const auto cfg = config_from(config_path, overrides);
      const auto r = sim::thermal_calibration(cfg);
      std::cout << "pulses " << r.pulses << " clicks_a " << r.clicks_a << " clicks_b " << r.clicks_b << '\n';
      print_peak("a", r.a);
      print_peak("b", r.b);
      if (!hist_out.empty()) write_histograms(hist_out, r);
    } else if (*acq) {
      const auto cfg = config_from(config_path, overrides);
      sim::DelayPair d;
      if (delays_arg.empty()) {
        const auto r = sim::thermal_calibration(cfg);
        d = {r.a.delay, r.b.delay};
        std::cout << "calibrated delays " << d.a << ',' << d.b << '\n';
      } else {
        const auto [a, b] = parse_pair(delays_arg);
        d = {a, b};
      }
      sim::AcquireOptions opt;
      opt.tcp = use_tcp;
      opt.dataset_dir = out_dir;
      const auto res = sim::acquire(cfg, {d}, opt);
      pso::write_report(std::cout, res.front().report);
    } else if (*run) {
      const auto cfg = config_from(config_path, overrides);
      sim::RunOptions opt;
      opt.acquire.tcp = use_tcp;
      opt.acquire.dataset_dir = fs::path(run_out) / "dataset";
      if (!delays_arg.empty()) {
        const auto [a, b] = parse_pair(delays_arg);
        opt.delays = sim::DelayPair{a, b};
      }
      const auto rep = sim::run_experiment(cfg, opt);
      sim::save_experiment(run_out, rep);
      sim::write_experiment_report(std::cout, rep);
    } else if (*rec) {
      const auto cfg = config_from(config_path, overrides);
      const auto [n, m] = parse_pair(class_arg);
      const auto recs = pso::DatasetWriter::load_class(
          dataset_dir, {static_cast<unsigned>(n), static_cast<unsigned>(m)});
      const auto vacuum = pso::DatasetWriter::load_class(dataset_dir, {0, 0}, sim::kShotNoisePrefix);
      if (recs.empty()) throw FormatError("no records of class " + class_arg + " in " + dataset_dir);
      const auto scale = sim::shot_noise_scale(vacuum);
      tomography::ReconstructionOptions mo;
      mo.max_iterations = max_iter;
      mo.epsilon = eps;
      const auto r = tomography::reconstruct(sim::to_dataset(recs, scale, cfg.n_c), mo);
      std::cout << "records " << r.records << "\niterations " << r.iterations << "\nconverged " << r.converged
                << '\n';
      print_state_summary(r.rho, sim::target_states(cfg));
      if (!rho_out.empty()) fock::save_binary(rho_out, r.rho);
      if (!json_out.empty()) std::ofstream(json_out) << fock::to_json(r.rho).dump(1) << '\n';
    } else if (*scan) {
      const auto cfg = config_from(config_path, overrides);
      sim::DelayPair d;
      if (delays_arg.empty()) {
        const auto r = sim::thermal_calibration(cfg);
        d = {r.a.delay, r.b.delay};
      } else {
        const auto [a, b] = parse_pair(delays_arg);
        d = {a, b};
      }
      std::vector<std::pair<std::int64_t, std::int64_t>> offsets;
      for (int i = -radius; i <= radius; ++i)
        for (int j = -radius; j <= radius; ++j) offsets.emplace_back(i, j);
      const auto rows = sim::delay_scan(cfg, d, offsets);
      if (scan_out.empty()) {
        sim::write_scan_table(std::cout, rows);
      } else {
        std::ofstream os(scan_out);
        sim::write_scan_table(os, rows);
      }
    } else if (*wit) {
      fock::TwoModeState rho;
      if (!state_path.empty()) {
        rho = fock::load_binary(state_path);
      } else {
        const auto cfg = config_from(config_path, overrides);
        const auto [n, m] = parse_pair(sig_arg);
        auto model = cfg.model.with_signature(static_cast<int>(n), static_cast<int>(m));
        if (lossless) model = model.lossless();
        rho = fock::lossy_subtracted_state(model, cfg.n_c).state;
        std::cout << "lambda " << model.lambda() << '\n';
      }
      const auto w = metrics::witness(rho);
      std::cout << "fidelity_11 " << w.fidelity_11 << "\nclass " << metrics::to_string(w.rank_class) << '\n';
    } else if (*con) {
      if (!summary_only) metrics::write_contour_table(std::cout, con_n, con_points, con_points);
      std::cout << std::setprecision(6);
      for (int n = 0; n <= 2; ++n) {
        const auto [l, f] = metrics::max_over_lambda(n, 1.0);
        std::cout << "# n=" << n << " max_lambda F(lambda,1) = " << f << " at lambda " << l;
        if (f > metrics::kRankOneThreshold)
          std::cout << "; eta_min(F > 0.25) = " << metrics::minimal_transmissivity(n);
        std::cout << '\n';
      }
    } else if (*proto) {
      if (!vector_out.empty()) {
        std::ofstream os(vector_out);
        hds::write_test_vector(os, hds::ramp_vector({64, 1024}, 1000, 16384));
        return 0;
      }
      if (soak_seconds > 0.0) {
        sim::ThroughputOptions o;
        o.seconds = soak_seconds;
        const auto r = sim::throughput_test(o);
        sim::write_throughput(std::cout, r);
        return r.mismatches == 0 && r.integrity_trips == 0 && r.server_flags == 0 ? 0 : 1;
      }
      hds::TestVector v;
      if (vector_in.empty()) {
        v = hds::ramp_vector({64, 1024}, 1000, 16384);
      } else {
        std::ifstream is(vector_in);
        v = hds::read_test_vector(is);
      }
      hds::HomodyneServer server(v.geometry, 1);
      server.set_test_pattern_mode(true);
      hds::replay(server, v);
      std::unique_ptr<hds::TcpServer> tcp;
      std::unique_ptr<hds::Link> link;
      if (proto_tcp) {
        tcp = std::make_unique<hds::TcpServer>(server, "hds");
        tcp->start(0, 0);
        link = std::make_unique<hds::TcpLink>("127.0.0.1", tcp->data_port(), tcp->control_port());
      } else {
        link = std::make_unique<hds::DirectLink>(server, "hds");
      }
      const auto c = hds::verify(*link, v);
      std::cout << "checked " << c.checked << "\nmismatches " << c.mismatches << "\nerror "
                << hds::to_string(c.error) << '\n';
      if (tcp) tcp->stop();
      return c.mismatches == 0 && c.error == hds::ErrorCode::None && c.checked == v.pairs.size() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
