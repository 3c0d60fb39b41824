#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include "psgen/common/random.hpp"
#include "psgen/hds/link.hpp"
#include "psgen/hds/server.hpp"
#include "psgen/pso/console.hpp"
#include "psgen/pso/orchestrator.hpp"
#include "psgen/pso/pipeline.hpp"
#include "psgen/pso/record.hpp"

namespace psgen::sim {

struct ThroughputOptions {
  hds::Geometry geometry{};          // full-size ring by default
  double seconds = 10.0;             // wall-clock duration
  std::int64_t mean_gap = 10;        // mean coarse bins between heralds
  std::int64_t delay_a = 7;
  std::int64_t delay_b = -2;
  std::uint64_t zero_rate = pso::kMaxZeroDetectionRate;
  bool tcp = true;
  std::uint64_t seed = 1;
};

struct ThroughputResult {
  std::uint64_t events = 0;       // pipeline events handed to the orchestrator
  std::uint64_t records = 0;      // records delivered to the sink
  std::uint64_t mismatches = 0;   // records whose words or encoding did not round-trip
  std::uint64_t integrity_trips = 0;
  std::uint32_t server_flags = 0;
  double seconds = 0.0;
  pso::RunReport report;

  double events_per_second() const { return seconds > 0.0 ? static_cast<double>(events) / seconds : 0.0; }
};

/// Loopback soak: one-per-mode detector pulses go through the coincidence
/// pipeline, filters and orchestrator; both servers run in test-pattern mode
/// (word = timetag), so every record can be checked against its timetag.
inline ThroughputResult throughput_test(const ThroughputOptions& opt = {}) {
  hds::HomodyneServer sa(opt.geometry, 11), sb(opt.geometry, 12);
  sa.set_test_pattern_mode(true);
  sb.set_test_pattern_mode(true);
  const std::uint32_t cap = sa.capacity();
  std::unique_ptr<hds::TcpServer> ta, tb;
  std::unique_ptr<hds::Link> la, lb;
  if (opt.tcp) {
    ta = std::make_unique<hds::TcpServer>(sa, "hds-a");
    tb = std::make_unique<hds::TcpServer>(sb, "hds-b");
    ta->start(0, 0);
    tb->start(0, 0);
    la = std::make_unique<hds::TcpLink>("127.0.0.1", ta->data_port(), ta->control_port());
    lb = std::make_unique<hds::TcpLink>("127.0.0.1", tb->data_port(), tb->control_port());
  } else {
    la = std::make_unique<hds::DirectLink>(sa, "hds-a");
    lb = std::make_unique<hds::DirectLink>(sb, "hds-b");
  }
  pso::RunSettings rs;
  rs.delay_a = opt.delay_a;
  rs.delay_b = opt.delay_b;
  rs.zdr_rate = opt.zero_rate;
  pso::SharedSettings settings(rs);
  ThroughputResult res;
  const auto check = [&](const pso::Record& r) {
    ++res.records;
    const std::int64_t t = static_cast<std::int64_t>(r.overflow) * cap + r.timetag;
    const auto expect = [&](std::int64_t d) {
      return static_cast<std::uint32_t>(((t + d) % cap + cap) % cap);
    };
    const bool words_ok = r.word(0) == expect(opt.delay_a) && r.word(1) == expect(opt.delay_b);
    if (!words_ok || pso::Record::decode(r.encode().data()) != r) ++res.mismatches;
  };
  pso::Orchestrator orch(*la, *lb, cap, settings, check);
  orch.handshake();

  random::Engine rng(opt.seed);
  pso::CoincidencePipeline pipe;
  const std::int64_t block = 65536;
  std::vector<std::uint32_t> words(block);
  std::vector<pso::DetectorPulse> pulses;
  std::int64_t next = 16, written = 0;
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  // Words run 64 bins ahead of herald time so both delays land inside a block.
  const auto ingest_to = [&](std::int64_t end) {
    while (written < end) {
      const std::int64_t n = std::min<std::int64_t>(block, end - written);
      for (std::int64_t i = 0; i < n; ++i) words[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>((written + i) % cap);
      sa.ingest(std::span(words.data(), static_cast<std::size_t>(n)));
      sb.ingest(std::span(words.data(), static_cast<std::size_t>(n)));
      written += n;
    }
  };
  std::int64_t h = 0;
  while (elapsed() < opt.seconds) {
    const std::int64_t end = h + block;
    pulses.clear();
    for (; next < end; next += 4 + static_cast<std::int64_t>(random::below(rng, static_cast<std::uint64_t>(2 * opt.mean_gap - 7)))) {
      pulses.push_back({0, 0, 3 * next + 1});
      pulses.push_back({1, 0, 3 * next + 1});
    }
    pipe.push(pulses);
    pipe.advance_to(3 * end - 1);
    const auto ev = pipe.take();
    res.events += ev.size();
    orch.submit(ev);
    h = end;
    ingest_to(h + 64);
    orch.service();
  }
  pipe.flush();
  orch.submit(pipe.take());
  orch.finish_events(h);
  orch.service();
  for (int i = 0; i < 3 && orch.pending() > 0; ++i) {
    ingest_to(written + cap / 2);
    orch.service();
  }
  orch.abandon_pending();
  // The rate counts the drain: most records are served after the loop.
  res.seconds = elapsed();
  res.report = orch.report();
  res.integrity_trips = res.report.integrity_refusals;
  res.server_flags = sa.status().flags | sb.status().flags;
  if (ta) ta->stop();
  if (tb) tb->stop();
  return res;
}

inline void write_throughput(std::ostream& os, const ThroughputResult& r) {
  os << "events " << r.events << "\nseconds " << r.seconds << "\nevents_per_second " << r.events_per_second()
     << "\nrecords " << r.records << "\nmismatches " << r.mismatches << "\nintegrity_trips " << r.integrity_trips
     << "\nserver_flags 0x" << std::hex << r.server_flags << std::dec << '\n';
  pso::write_report(os, r.report);
}

}  // namespace psgen::sim
