#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <vector>

#include "psgen/hds/link.hpp"
#include "psgen/hds/server.hpp"
#include "psgen/pso/centroid.hpp"
#include "psgen/pso/console.hpp"
#include "psgen/pso/filters.hpp"
#include "psgen/pso/orchestrator.hpp"
#include "psgen/pso/pipeline.hpp"
#include "psgen/pso/record.hpp"
#include "psgen/pso/signature.hpp"

using namespace psgen;
using namespace psgen::pso;

namespace {

/// Calls f(counts) for every 9-bin pattern with total <= max_sum.
template <typename F>
void for_each_pattern(unsigned max_sum, F&& f) {
  SideCounts c{};
  const auto rec = [&](auto&& self, int k, unsigned left) -> void {
    if (k == kSubBins) {
      f(c);
      return;
    }
    for (unsigned v = 0; v <= left; ++v) {
      c[k] = v;
      self(self, k + 1, left - v);
    }
    c[k] = 0;
  };
  rec(rec, 0, max_sum);
}

std::vector<SideCounts> patterns(unsigned max_sum) {
  std::vector<SideCounts> out;
  for_each_pattern(max_sum, [&](const SideCounts& c) { out.push_back(c); });
  return out;
}

Event event_at(std::int64_t coarse, unsigned a = 1, unsigned b = 1) {
  SideCounts ca{}, cb{};
  ca[4] = a;
  cb[4] = b;
  return Event{coarse, Signature::from_counts(ca, cb), 3 * coarse + 4, 3 * coarse + 4 + kPipelineDepth, 3 * coarse};
}

/// Re-scans the whole stream at every alignment with plain division.
std::vector<Event> rescan_oracle(const std::vector<DetectorPulse>& pulses) {
  std::vector<Event> out;
  if (pulses.empty()) return out;
  std::vector<bool> used(pulses.size(), false);
  const std::int64_t first = pulses.front().subbin;
  const std::int64_t last = pulses.back().subbin + kSubBins;
  for (std::int64_t t = first; t <= last; ++t) {
    SideCounts a{}, b{};
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pulses.size(); ++i) {
      if (used[i] || pulses[i].subbin > t || pulses[i].subbin < t - 8) continue;
      (pulses[i].side == 0 ? a : b)[t - pulses[i].subbin] += 1;
      members.push_back(i);
    }
    if (members.empty()) continue;
    unsigned num = 0, tot = 0;
    for (int k = 0; k < kSubBins; ++k) {
      num += k * (a[k] + b[k]);
      tot += a[k] + b[k];
    }
    const unsigned bin = num / tot;
    if (bin < 4 || bin > 6) continue;
    for (auto i : members) used[i] = true;
    Event e;
    e.signature = Signature::from_counts(a, b);
    e.record_subbin = t;
    e.herald_emit_subbin = t + kPipelineDepth;
    e.last_pulse_subbin = pulses[members.back()].subbin;
    e.coarse = static_cast<std::int64_t>(std::floor((t - static_cast<double>(bin)) / 3.0));
    out.push_back(e);
  }
  return out;
}

constexpr hds::Geometry kSmall{64, 1024};

void fill_ramp(hds::HomodyneServer& s, std::uint64_t n) {
  std::vector<std::uint32_t> chunk;
  chunk.reserve(1 << 15);
  std::uint64_t t = s.accepted();
  const std::uint64_t end = t + n;
  while (t < end) {
    chunk.clear();
    while (chunk.size() < chunk.capacity() && t < end) chunk.push_back(static_cast<std::uint32_t>(t++ % s.capacity()));
    s.ingest(chunk);
  }
}

}  // namespace

TEST(Signature, LayoutAndSideSums) {
  SideCounts a{}, b{};
  a[0] = 1;
  a[8] = 2;
  b[4] = 7;
  const auto s = Signature::from_counts(a, b);
  EXPECT_EQ(s.raw() & 0x7u, 1u);
  EXPECT_EQ((s.raw() >> 24) & 0x7u, 2u);
  EXPECT_EQ((s.raw() >> 27) & 0x1fu, 3u);
  EXPECT_EQ(s.count(1, 4), 7u);
  EXPECT_EQ(s.klass(), (SignatureClass{3, 7}));
  EXPECT_TRUE(s.consistent());
  EXPECT_TRUE(s.coincident());
  a[2] = 9;  // saturates the 3-bit field
  EXPECT_EQ(Signature::from_counts(a, b).count(0, 2), 7u);
  EXPECT_TRUE(Signature::from_counts(a, b).consistent());
}

TEST(Signature, EveryPatternIsConsistent) {
  const auto ps = patterns(4);
  for (const auto& a : ps) {
    SideCounts b{};
    b[8 - (a[0] % 9)] = a[1];
    const auto s = Signature::from_counts(a, b);
    ASSERT_TRUE(s.consistent());
    for (int k = 0; k < kSubBins; ++k) ASSERT_EQ(s.count(0, k), a[k]);
  }
}

TEST(Centroid, Examples) {
  SideCounts a{}, b{};
  EXPECT_FALSE(weighted_average_subbin(a, b).has_value());
  a[4] = 1;
  EXPECT_EQ(weighted_average_subbin(a, b), 4);
  a = {};
  a[2] = 1;
  b[6] = 1;
  EXPECT_EQ(weighted_average_subbin(a, b), 4);
  a = {};
  b = {};
  a[4] = 1;
  a[5] = 1;  // mean 4.5: the lower bin wins
  EXPECT_EQ(weighted_average_subbin(a, b), 4);
}

TEST(Centroid, ExhaustiveAgainstDivisionUpToSixPerSide) {
  const auto ps = patterns(6);
  ASSERT_EQ(ps.size(), 5005u);
  std::uint64_t mismatches = 0, checked = 0;
  for (const auto& a : ps) {
    unsigned na = 0, sa = 0;
    for (int k = 0; k < kSubBins; ++k) {
      na += k * a[k];
      sa += a[k];
    }
    for (const auto& b : ps) {
      unsigned num = na, tot = sa;
      for (int k = 0; k < kSubBins; ++k) {
        num += k * b[k];
        tot += b[k];
      }
      const auto got = weighted_average_subbin(a, b);
      if (tot == 0) {
        mismatches += got.has_value();
      } else {
        mismatches += !got || *got != static_cast<int>(num / tot);
      }
      ++checked;
    }
  }
  EXPECT_EQ(checked, 5005ull * 5005ull);
  EXPECT_EQ(mismatches, 0u);
}

TEST(Pipeline, CoincidenceInOneCoarseBin) {
  const std::vector<DetectorPulse> p{{0, 0, 30}, {1, 2, 31}};
  const auto ev = coincidence_pipeline(p);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].signature.klass(), (SignatureClass{1, 1}));
  EXPECT_EQ(ev[0].coarse, 10);
}

TEST(Pipeline, SinglePulseGivesSingleSidedEvent) {
  const std::vector<DetectorPulse> p{{1, 0, 100}};
  const auto ev = coincidence_pipeline(p);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].signature.klass(), (SignatureClass{0, 1}));
  EXPECT_EQ(ev[0].record_subbin, 104);
  EXPECT_EQ(ev[0].signature.count(1, 4), 1u);
  EXPECT_FALSE(mode_accepts(CaptureMode::coincidence, ev[0].signature));
  EXPECT_TRUE(mode_accepts(CaptureMode::singles, ev[0].signature));
}

TEST(Pipeline, PulsesNineApartMatchRescan) {
  const std::vector<DetectorPulse> p{{0, 0, 50}, {1, 0, 59}};
  const auto ev = coincidence_pipeline(p);
  EXPECT_EQ(ev, rescan_oracle(p));
  EXPECT_EQ(ev.size(), 2u);
}

TEST(Pipeline, RandomStreamsMatchRescan) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DetectorPulse> p;
    std::int64_t t = 0;
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      t += static_cast<std::int64_t>(rng() % 7);
      p.push_back({static_cast<int>(rng() % 2), static_cast<int>(rng() % 3), t});
    }
    const auto got = coincidence_pipeline(p);
    const auto want = rescan_oracle(p);
    ASSERT_EQ(got, want) << "trial " << trial;
  }
}

TEST(Pipeline, EachPulseFeedsAtMostOneEvent) {
  std::mt19937_64 rng(11);
  std::vector<DetectorPulse> p;
  std::int64_t t = 0;
  for (int i = 0; i < 20000; ++i) {
    t += static_cast<std::int64_t>(rng() % 12);
    p.push_back({static_cast<int>(rng() % 2), 0, t});
  }
  CoincidencePipeline pipe;
  pipe.push(p);
  pipe.flush();
  std::uint64_t counted = 0;
  for (const auto& e : pipe.take()) counted += e.signature.side_sum(0) + e.signature.side_sum(1);
  EXPECT_EQ(counted + pipe.pulses_expired(), pipe.pulses_in());
}

TEST(Pipeline, HeraldLatencyIsFixedDepthWithinOneSubbin) {
  std::mt19937_64 rng(3);
  std::int64_t lo = 1 << 30, hi = -1;
  for (int i = 0; i < 3000; ++i) {
    const std::int64_t c = 100 + 20 * i;
    std::vector<DetectorPulse> p;
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) p.push_back({static_cast<int>(rng() % 2), k % 3, 3 * c + static_cast<std::int64_t>(rng() % 3)});
    std::sort(p.begin(), p.end(), [](auto& x, auto& y) { return x.subbin < y.subbin; });
    const auto ev = coincidence_pipeline(p);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].coarse, c);
    EXPECT_EQ(ev[0].herald_emit_subbin - ev[0].record_subbin, kPipelineDepth);
    const auto lat = ev[0].herald_emit_subbin - ev[0].last_pulse_subbin;
    lo = std::min(lo, lat);
    hi = std::max(hi, lat);
  }
  EXPECT_LE(hi - lo, 1);
  EXPECT_GE(lo, kPipelineDepth);
}

TEST(Pipeline, StreamingMatchesBatch) {
  std::mt19937_64 rng(5);
  std::vector<DetectorPulse> p;
  std::int64_t t = 0;
  for (int i = 0; i < 5000; ++i) {
    t += static_cast<std::int64_t>(rng() % 10);
    p.push_back({static_cast<int>(rng() % 2), 0, t});
  }
  CoincidencePipeline pipe;
  std::vector<Event> streamed;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pipe.push(p[i]);
    if (i % 97 == 0) {
      auto part = pipe.take();
      streamed.insert(streamed.end(), part.begin(), part.end());
    }
  }
  pipe.flush();
  auto rest = pipe.take();
  streamed.insert(streamed.end(), rest.begin(), rest.end());
  EXPECT_EQ(streamed, coincidence_pipeline(p));
  EXPECT_THROW(pipe.push(DetectorPulse{0, 0, 0}), DomainError);
}

TEST(HoldFilter, Examples) {
  const std::vector<Event> apart{event_at(10), event_at(14)};
  EXPECT_EQ(hold_time_filter(apart, 3).size(), 2u);
  const std::vector<Event> close{event_at(10), event_at(11)};
  EXPECT_TRUE(hold_time_filter(close, 3).empty());
  const auto kept = hold_time_filter(close, 3, true);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].coarse, 10);
  const std::vector<Event> chain{event_at(0), event_at(3), event_at(6), event_at(20)};
  const auto c = hold_time_filter(chain, 3);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].coarse, 20);
  EXPECT_EQ(hold_time_filter(close, 0).size(), 2u);
}

TEST(HoldFilter, PoissonSurvivalMatchesThinning) {
  std::mt19937_64 rng(99);
  std::bernoulli_distribution hit(0.01);
  std::vector<Event> ev;
  for (std::int64_t t = 0; ev.size() < 1000000; ++t)
    if (hit(rng)) ev.push_back(event_at(t));
  const std::int64_t hold = 3;
  HoldFilter f(hold);
  std::size_t kept = 0;
  for (const auto& e : ev) kept += f.push(e).has_value();
  kept += f.flush().has_value();
  EXPECT_EQ(kept + f.dropped(), ev.size());
  const double survival = static_cast<double>(kept) / static_cast<double>(ev.size());
  const double expected = std::exp(-2.0 * 0.01 * hold);
  EXPECT_NEAR(survival / expected, 1.0, 0.05);
}

TEST(SeedFilter, Examples) {
  std::vector<Event> ev;
  for (int i = 0; i < 100; ++i) ev.push_back(event_at(i));
  EXPECT_EQ(seed_rejection_filter(ev, {0, 0, 10}).size(), ev.size());
  std::vector<Event> locked;
  for (int i = 0; i < 100; ++i) locked.push_back(event_at(1000 * i + 12));
  EXPECT_TRUE(seed_rejection_filter(locked, {10, 5, 1000}).empty());
  EXPECT_THROW(seed_rejection_filter(ev, {0, 10, 10}), DomainError);
  const SeedWindow wrap{8, 4, 10};
  EXPECT_TRUE(wrap.rejects(9));
  EXPECT_TRUE(wrap.rejects(11));
  EXPECT_FALSE(wrap.rejects(12));
}

TEST(SeedFilter, UniformProportion) {
  std::mt19937_64 rng(17);
  std::vector<Event> ev;
  for (int i = 0; i < 1000000; ++i) ev.push_back(event_at(static_cast<std::int64_t>(rng() % 1000000000)));
  const auto kept = seed_rejection_filter(ev, {300, 5, 1000});
  const double dropped = 1.0 - static_cast<double>(kept.size()) / static_cast<double>(ev.size());
  EXPECT_NEAR(dropped, 0.005, 0.001);
}

TEST(ZeroDetection, RateZeroGivesNothing) {
  EXPECT_TRUE(zero_detection_sampler(0, 1000, 0, 100000, {}, 3).tags.empty());
  EXPECT_THROW(zero_detection_sampler(kMaxZeroDetectionRate + 1, 1 << 20, 0, 10, {}, 3), DomainError);
}

TEST(ZeroDetection, NeverWithinHoldOfAnEvent) {
  std::mt19937_64 rng(23);
  std::vector<std::int64_t> events;
  for (std::int64_t t = 0; t < 2000000; t += 1 + static_cast<std::int64_t>(rng() % 400)) events.push_back(t);
  const std::int64_t hold = 3;
  const auto plan = zero_detection_sampler(1 << 17, 1 << 20, 0, 2000000, events, hold);
  EXPECT_EQ(plan.tags.size() + plan.suppressed, plan.attempts);
  EXPECT_GT(plan.tags.size(), 200000u);
  for (auto t : plan.tags) {
    const auto it = std::lower_bound(events.begin(), events.end(), t - hold);
    ASSERT_TRUE(it == events.end() || *it > t + hold) << t;
  }
  // Dense events: most attempts collide and the plan reports it.
  std::vector<std::int64_t> dense;
  for (std::int64_t t = 0; t < 100000; t += 5) dense.push_back(t);
  EXPECT_TRUE(zero_detection_sampler(1 << 17, 1 << 20, 0, 100000, dense, 3).infeasible);
}

TEST(ZeroDetection, EvenSpacingPerPeriod) {
  const auto plan = zero_detection_sampler(4, 100, 0, 300, {}, 0);
  EXPECT_EQ(plan.tags, (std::vector<std::int64_t>{0, 25, 50, 75, 100, 125, 150, 175, 200, 225, 250, 275}));
  const auto mid = zero_detection_sampler(4, 100, 130, 210, {}, 0);
  EXPECT_EQ(mid.tags, (std::vector<std::int64_t>{150, 175, 200}));
}

TEST(Record, RoundTripAndLayout) {
  SideCounts a{}, b{};
  a[3] = 1;
  b[5] = 2;
  const Record r = Record::from_words(Signature::from_counts(a, b), 7, 123456, hds::make_word(-100, 8000),
                                      hds::make_word(4000, -8192));
  const auto bytes = r.encode();
  EXPECT_EQ(bytes.size(), 24u);
  EXPECT_EQ(bytes[8], 7);
  EXPECT_EQ(bytes[12] | (bytes[13] << 8) | (bytes[14] << 16), 123456);
  EXPECT_EQ(Record::decode(bytes.data()), r);
  EXPECT_EQ(r.adc[0], -100);
  EXPECT_EQ(r.adc[1], 8000);
  EXPECT_EQ(r.adc[3], -8192);
  EXPECT_EQ(r.word(1), hds::make_word(4000, -8192));
}

TEST(Record, DatasetWriterSplitsByClassAndSize) {
  const auto dir = std::filesystem::temp_directory_path() / "psgen_pso_writer";
  std::filesystem::remove_all(dir);
  {
    DatasetWriter w(dir, 3);
    for (int i = 0; i < 7; ++i) w.write(Record{event_at(i, 1, 1).signature, 0, static_cast<std::uint32_t>(i), {}});
    w.write(Record{Signature{}, 0, 99, {}});
    w.close();
    EXPECT_EQ(w.counts().at({1, 1}), 7u);
    EXPECT_EQ(w.counts().at({0, 0}), 1u);
    EXPECT_EQ(w.files().size(), 4u);
  }
  const auto back = DatasetWriter::load_class(dir, {1, 1});
  ASSERT_EQ(back.size(), 7u);
  for (int i = 0; i < 7; ++i) EXPECT_EQ(back[i].timetag, static_cast<std::uint32_t>(i));
  EXPECT_EQ(std::filesystem::file_size(dir / "class_1_1_2.rec"), 24u);
  std::filesystem::remove_all(dir);
}

TEST(Console, CommandsUpdateSnapshot) {
  SharedSettings s;
  EXPECT_EQ(handle_console(s, "DELAY 12 -3"), "OK");
  EXPECT_EQ(handle_console(s, "hold 5"), "OK");
  EXPECT_EQ(handle_console(s, "SEED 10 5 1000"), "OK");
  EXPECT_EQ(handle_console(s, "MODE SINGLES"), "OK");
  EXPECT_EQ(handle_console(s, "ZDR 131072"), "OK");
  EXPECT_EQ(handle_console(s, "KEEPLEADER ON"), "OK");
  const auto snap = s.snapshot();
  EXPECT_EQ(snap.delay_a, 12);
  EXPECT_EQ(snap.delay_b, -3);
  EXPECT_EQ(snap.hold, 5);
  EXPECT_EQ(snap.seed.width, 5);
  EXPECT_EQ(snap.mode, CaptureMode::singles);
  EXPECT_TRUE(snap.keep_leader);
  EXPECT_EQ(handle_console(s, "SETTINGS?"), "DELAY=12,-3 HOLD=5 KEEPLEADER=ON SEED=10,5,1000 MODE=SINGLES ZDR=131072");
  EXPECT_EQ(handle_console(s, "ZDR 131073").rfind("ERR", 0), 0u);
  EXPECT_EQ(handle_console(s, "SEED 0 10 10").rfind("ERR", 0), 0u);
  EXPECT_EQ(handle_console(s, "HOLD -1").rfind("ERR", 0), 0u);
  EXPECT_EQ(handle_console(s, "BOGUS").rfind("ERR", 0), 0u);
  EXPECT_EQ(handle_console(s, "STOP"), "OK");
  EXPECT_TRUE(s.snapshot().stop);
}

TEST(Orchestrator, LoopbackRoundTripsTimetags) {
  hds::HomodyneServer sa(kSmall, 1), sb(kSmall, 2);
  sa.set_test_pattern_mode(true);
  sb.set_test_pattern_mode(true);
  hds::DirectLink la(sa, "a"), lb(sb, "b");
  SharedSettings settings;
  handle_console(settings, "DELAY 7 -2");
  handle_console(settings, "MODE SINGLES");
  handle_console(settings, "ZDR 64");
  std::vector<Record> got;
  Orchestrator orch(la, lb, sa.capacity(), settings, [&](const Record& r) { got.push_back(r); });
  orch.handshake();

  std::mt19937_64 rng(1);
  const std::uint32_t cap = sa.capacity();
  std::int64_t coarse = 10;
  std::uint64_t written = 0;
  for (int chunk = 0; chunk < 40; ++chunk) {
    std::vector<Event> ev;
    const std::int64_t chunk_end = (chunk + 1) * 8192;
    while (coarse < chunk_end) {
      ev.push_back(event_at(coarse, static_cast<unsigned>(rng() % 3), 1));
      coarse += 1 + static_cast<std::int64_t>(rng() % 40);
    }
    orch.submit(ev);
    const std::uint64_t target = static_cast<std::uint64_t>(chunk_end) + 64;
    fill_ramp(sa, target - written);
    fill_ramp(sb, target - written);
    written = target;
    orch.service();
  }
  orch.finish_events(40 * 8192);
  orch.service();
  for (int i = 0; i < 3 && orch.pending() > 0; ++i) {
    fill_ramp(sa, cap / 2);
    fill_ramp(sb, cap / 2);
    orch.service();
  }
  orch.abandon_pending();
  const auto rep = orch.report();
  EXPECT_EQ(rep.stale_aborted, 0u);
  EXPECT_TRUE(rep.conserved());
  ASSERT_GT(got.size(), 1000u);
  for (const auto& r : got) {
    const std::int64_t t = static_cast<std::int64_t>(r.overflow) * cap + r.timetag;
    ASSERT_EQ(r.word(0), static_cast<std::uint32_t>((t + 7) % cap));
    ASSERT_EQ(r.word(1), static_cast<std::uint32_t>((t - 2 + cap) % cap));
  }
  EXPECT_GT(rep.hold_dropped, 0u);
  EXPECT_GT(rep.zero_kept, 0u);
  EXPECT_EQ(rep.per_class.at({0, 0}), rep.zero_kept);
}

TEST(Orchestrator, StaleEntriesAreCounted) {
  hds::HomodyneServer sa(kSmall, 1), sb(kSmall, 2);
  sa.set_test_pattern_mode(true);
  sb.set_test_pattern_mode(true);
  hds::DirectLink la(sa), lb(sb);
  SharedSettings settings;
  std::size_t n = 0;
  Orchestrator orch(la, lb, sa.capacity(), settings, [&](const Record&) { ++n; });
  std::vector<Event> ev{event_at(100), event_at(200), event_at(40000)};
  orch.submit(ev);
  orch.finish_events(40001);
  fill_ramp(sa, 3 * sa.capacity());  // overwrites everything twice before service
  fill_ramp(sb, 3 * sb.capacity());
  orch.service();
  orch.abandon_pending();
  const auto rep = orch.report();
  EXPECT_EQ(n, 0u);
  EXPECT_EQ(rep.stale_aborted, 3u);
  EXPECT_TRUE(rep.conserved());
}

TEST(Orchestrator, SeedPlaceholderAndModeAccounting) {
  hds::HomodyneServer sa(kSmall, 1), sb(kSmall, 2);
  hds::DirectLink la(sa), lb(sb);
  SharedSettings settings;
  handle_console(settings, "SEED 0 10 100");
  std::size_t n = 0;
  Orchestrator orch(la, lb, sa.capacity(), settings, [&](const Record&) { ++n; });
  std::vector<Event> ev;
  for (int i = 0; i < 300; ++i) ev.push_back(event_at(50 * i + 5, 1, i % 4 == 0 ? 0 : 1));
  orch.submit(ev);
  orch.finish_events(20000);
  // Half of the samples are placeholders on side B.
  std::vector<std::uint32_t> wa(sa.capacity() / 2 + 100, hds::make_word(1, 2));
  std::vector<std::uint32_t> wb(wa.size());
  for (std::size_t t = 0; t < wb.size(); ++t) wb[t] = (t / 1000) % 2 ? hds::make_word(3, 4) : 0x80000000u;
  sa.set_test_pattern_mode(true);
  sb.set_test_pattern_mode(true);
  sa.ingest(wa);
  sb.ingest(wb);
  orch.service();
  const auto rep = orch.report();
  EXPECT_EQ(rep.candidates, 300u);
  EXPECT_EQ(rep.mode_dropped, 75u);
  EXPECT_GT(rep.seed_dropped, 0u);
  EXPECT_GT(rep.placeholder_excluded, 0u);
  EXPECT_EQ(rep.kept, n);
  EXPECT_TRUE(rep.conserved());
}

TEST(Orchestrator, HandshakeRejectsMisalignedServers) {
  hds::HomodyneServer sa(kSmall, 1), sb(kSmall, 2);
  sa.set_test_pattern_mode(true);
  fill_ramp(sa, sa.capacity() + 10);
  hds::DirectLink la(sa), lb(sb);
  SharedSettings settings;
  Orchestrator orch(la, lb, sa.capacity(), settings, nullptr);
  EXPECT_THROW(orch.handshake(), AcquisitionError);
}
