#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "psgen/hds/control.hpp"
#include "psgen/hds/link.hpp"
#include "psgen/hds/server.hpp"
#include "psgen/hds/test_vector.hpp"
#include "psgen/homodyne/phase_drive.hpp"

using namespace psgen;
using namespace psgen::hds;

namespace {

constexpr Geometry kSmall{64, 1024};  // 65536 words, half 32768

/// Ingests `n` words produced by f(tick) in chunks.
void fill(HomodyneServer& s, std::uint64_t n, const std::function<std::uint32_t(std::uint64_t)>& f) {
  std::vector<std::uint32_t> chunk;
  chunk.reserve(1 << 16);
  std::uint64_t t = s.accepted();
  const std::uint64_t end = t + n;
  while (t < end) {
    chunk.clear();
    while (chunk.size() < chunk.capacity() && t < end) chunk.push_back(f(t++));
    s.ingest(chunk);
  }
}

std::uint32_t sample_word(std::uint64_t t) { return make_word(static_cast<int>(t % 1000) - 500, 0); }

}  // namespace

TEST(SampleWord, PlaceholderNeverProducedBySignExtension) {
  for (std::uint32_t raw = 0; raw < (1u << 14); ++raw) {
    const std::uint16_t half = sign_extend14(static_cast<std::uint16_t>(raw));
    EXPECT_NE(half, kPlaceholder);
    EXPECT_TRUE(is_valid_half(half));
  }
  EXPECT_FALSE(is_valid_half(kPlaceholder));
  EXPECT_EQ(homodyne_sample(make_word(-8192, 17)), -8192);
  EXPECT_EQ(phase_sample(make_word(-8192, 17)), 17);
  EXPECT_EQ(sign_extend14(0x2000), 0xe000);
}

TEST(RingBuffer, FullGeometryAddressing) {
  RingBuffer ring(Geometry{}, 0);
  EXPECT_EQ(ring.capacity(), 69120000u);
  EXPECT_EQ(ring.address(0), 0u);
  EXPECT_EQ(ring.address(69119999), 67499u * 1024 + 1023);
  EXPECT_EQ(69119999u / 1024, 67499u);
  EXPECT_EQ(69119999u % 1024, 1023u);
}

TEST(RingBuffer, AddressBijectionWithShuffledPages) {
  RingBuffer ring(Geometry{}, 99);
  std::vector<bool> seen(ring.capacity(), false);
  std::size_t dup = 0;
  for (std::uint32_t t = 0; t < ring.capacity(); ++t) {
    const auto a = ring.address(t);
    ASSERT_LT(a, ring.capacity());
    dup += seen[a];
    seen[a] = true;
  }
  EXPECT_EQ(dup, 0u);
  // Shuffled map is a permutation that is not the identity.
  std::vector<std::uint32_t> sorted = ring.page_map();
  std::sort(sorted.begin(), sorted.end());
  for (std::uint32_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
  EXPECT_NE(ring.page_map(), sorted);
}

TEST(RingBuffer, WrapIncrementsOverflow) {
  HomodyneServer s;
  EXPECT_EQ(s.status().overflow, 0u);
  fill(s, s.capacity(), sample_word);
  EXPECT_EQ(s.status().overflow, 1u);
  EXPECT_EQ(s.status().current_timetag, 0u);
  fill(s, 5, sample_word);
  EXPECT_EQ(s.status().overflow, 1u);
  EXPECT_EQ(s.status().current_timetag, 5u);
  EXPECT_EQ(s.ring().cursor(), 0u);  // partial burst still staged
}

TEST(RingBuffer, OverflowNumberIs29Bits) {
  EXPECT_EQ(RingBuffer::overflow_of(std::uint64_t{kOverflowMask} * 100, 100), kOverflowMask);
  EXPECT_EQ(RingBuffer::overflow_of(std::uint64_t{kOverflowMask + 1} * 100, 100), 0u);
  EXPECT_NEAR(69120000 / 1e8, 0.6912, 1e-12);
}

TEST(Query, RampRoundTripAcrossPages) {
  HomodyneServer s;
  s.set_test_pattern_mode(true);
  const auto v = ramp_vector(Geometry{}, 1000, 16384);
  EXPECT_GE(v.pairs.back().first / 1024 - v.pairs.front().first / 1024, 3u);
  replay(s, v);
  DirectLink link(s);
  const Conformance c = verify(link, v);
  EXPECT_EQ(c.error, ErrorCode::None);
  EXPECT_EQ(c.checked, 16384u);
  EXPECT_EQ(c.mismatches, 0u);
}

TEST(Query, RawAndIntegratedWindows) {
  HomodyneServer s(kSmall);
  fill(s, s.half() + 64, [](std::uint64_t t) { return make_word(static_cast<int>(t % 7) - 3, 100); });
  DirectLink link(s);
  const std::vector<std::uint32_t> tags{10, 11, 500};
  auto r = link.query(0, tags);
  ASSERT_TRUE(r.ok());
  for (std::size_t i = 0; i < tags.size(); ++i) EXPECT_EQ(r.words[i], make_word(static_cast<int>(tags[i] % 7) - 3, 100));
  s.set_config({4, false, 0, 1});
  r = link.query(0, tags);
  ASSERT_TRUE(r.ok());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    int sum = 0;
    for (std::uint32_t k = 0; k < 4; ++k) sum += static_cast<int>((tags[i] + k) % 7) - 3;
    EXPECT_EQ(homodyne_sample(r.words[i]), sum);
    EXPECT_EQ(phase_sample(r.words[i]), 400);
  }
  EXPECT_EQ(s.status().flags & kIntegrationSaturated, 0u);
  // A window that runs into the active half is refused.
  EXPECT_EQ(link.query(0, std::vector<std::uint32_t>{s.half() - 2}).error, ErrorCode::HalfViolation);
}

TEST(Query, IntegrationSaturatesAwayFromPlaceholder) {
  HomodyneServer s(kSmall);
  fill(s, s.half() + 64, [](std::uint64_t) { return make_word(-8192, 8191); });
  s.set_config({8, false, 0, 1});
  DirectLink link(s);
  const auto r = link.query(0, std::vector<std::uint32_t>{0});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(homodyne_sample(r.words[0]), -32767);
  EXPECT_EQ(phase_sample(r.words[0]), 32767);
  EXPECT_FALSE(is_placeholder(r.words[0]));
  EXPECT_NE(s.status().flags & kIntegrationSaturated, 0u);
}

TEST(Query, SlopeCheckRejectsFlybackAtTenthOfPercent) {
  HomodyneServer s(Geometry{2048, 1024});
  const auto drive = homodyne::PhaseDrive::side_b();
  fill(s, s.half() + 8, [&](std::uint64_t t) {
    return make_word(static_cast<int>(t % 100), homodyne::phase_at(drive, static_cast<std::int64_t>(t)).adc_code);
  });
  s.set_config({1, true, 0, 1});
  std::mt19937_64 rng(5);
  std::vector<std::uint32_t> tags(1000000);
  for (auto& t : tags) t = static_cast<std::uint32_t>(rng() % s.half());
  DirectLink link(s);
  const auto r = link.query(0, tags);
  ASSERT_TRUE(r.ok());
  std::size_t rejected = 0, wrong = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    // The first ramp sample sits below the last flyback sample and is rejected too.
    const bool flyback = !homodyne::phase_at(drive, tags[i]).in_ramp || (tags[i] > 0 && !homodyne::phase_at(drive, tags[i] - 1).in_ramp);
    rejected += is_placeholder(r.words[i]);
    if (!is_placeholder(r.words[i])) {
      EXPECT_EQ(homodyne_sample(r.words[i]), static_cast<int>(tags[i] % 100));
    } else {
      wrong += !flyback;
      EXPECT_EQ(phase_sample(r.words[i]), homodyne::phase_at(drive, tags[i]).adc_code);
    }
  }
  const double rate = static_cast<double>(rejected) / tags.size();
  EXPECT_NEAR(rate, 0.001, 0.0005);
  EXPECT_EQ(wrong, 0u);
}

TEST(Query, TypedErrors) {
  HomodyneServer s(kSmall);
  fill(s, s.half() + 8, sample_word);  // epoch 0, writer in half 1
  Session session;
  const std::vector<std::uint32_t> bad_keyword{0x12345678, 0, 5};
  auto r = s.handle(session, bad_keyword);
  EXPECT_EQ(r.error, ErrorCode::KeywordMismatch);
  EXPECT_EQ(s.handle(session, encode_request(0, std::vector<std::uint32_t>{5})).error, ErrorCode::None);
  EXPECT_EQ(s.handle(session, encode_request(0, std::vector<std::uint32_t>{s.half() + 1})).error, ErrorCode::HalfViolation);
  EXPECT_EQ(s.handle(session, encode_request(1, std::vector<std::uint32_t>{5})).error, ErrorCode::StaleOverflow);
  EXPECT_EQ(s.handle(session, encode_request(0, std::vector<std::uint32_t>{s.capacity()})).error, ErrorCode::TimetagRange);
  EXPECT_EQ(s.handle(session, std::vector<std::uint32_t>{}).error, ErrorCode::Malformed);
  EXPECT_EQ(s.handle(session, std::vector<std::uint32_t>{kKeyword}).error, ErrorCode::Malformed);

  // Advance into epoch 1, half 0: epoch-0 half 1 is sealed, half 0 overwritten.
  fill(s, s.half(), sample_word);
  EXPECT_EQ(s.handle(session, encode_request(0, std::vector<std::uint32_t>{s.half() + 1})).error, ErrorCode::None);
  EXPECT_EQ(s.handle(session, encode_request(0, std::vector<std::uint32_t>{5})).error, ErrorCode::StaleOverflow);
  EXPECT_EQ(s.handle(session, encode_request(1, std::vector<std::uint32_t>{5})).error, ErrorCode::HalfViolation);
  EXPECT_EQ(s.handle(session, encode_request(kOverflowMask, std::vector<std::uint32_t>{s.half() + 1})).error,
            ErrorCode::StaleOverflow);
}

TEST(Query, ContinuationMessagesKeepEpoch) {
  HomodyneServer s(kSmall);
  fill(s, s.half() + 8, sample_word);
  Session session;
  auto r = s.handle(session, encode_request(0, std::vector<std::uint32_t>{1, 2}));
  ASSERT_TRUE(r.ok());
  r = s.handle(session, std::vector<std::uint32_t>{3, 4, 5});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.overflow, 0u);
  ASSERT_EQ(r.words.size(), 3u);
  EXPECT_EQ(r.words[2], sample_word(5));
  // An error closes the request: the next bare message is a keyword mismatch.
  EXPECT_FALSE(s.handle(session, std::vector<std::uint32_t>{s.capacity() + 7}).ok());
  EXPECT_EQ(s.handle(session, std::vector<std::uint32_t>{3}).error, ErrorCode::KeywordMismatch);
}

TEST(Query, EveryMessageGetsOneDecodableFrame) {
  HomodyneServer s(kSmall);
  fill(s, s.half() + 8, sample_word);
  Session session;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint32_t> msg(rng() % 6);
    for (auto& w : msg) {
      const auto pick = rng() % 4;
      w = pick == 0 ? kKeyword : pick == 1 ? static_cast<std::uint32_t>(rng() % 3) : pick == 2 ? static_cast<std::uint32_t>(rng() % s.capacity()) : static_cast<std::uint32_t>(rng());
    }
    const Response r = s.handle(session, msg);
    const Response back = decode_response(encode_response(r));
    EXPECT_EQ(back.error, r.error);
    EXPECT_EQ(back.words, r.words);
  }
}

TEST(Query, HalfSafetyWithEpochTaggedPatterns) {
  HomodyneServer s(kSmall);
  s.set_test_pattern_mode(true);
  const std::uint32_t cap = s.capacity();
  const auto tagged = [cap](std::uint64_t t) { return static_cast<std::uint32_t>(((t / cap) << 24) | (t % cap)); };
  DirectLink link(s);
  std::mt19937_64 rng(11);
  for (int step = 0; step < 40; ++step) {
    fill(s, 4096 + rng() % 20000, tagged);
    const std::uint64_t ticks = s.ring().ticks();
    const std::uint32_t o = RingBuffer::overflow_of(ticks, cap);
    const bool in_second = (ticks % cap) >= s.half();
    const std::uint32_t q = in_second ? o : o - 1;
    if (!in_second && ticks < cap) continue;
    std::vector<std::uint32_t> tags(64);
    for (auto& t : tags) t = static_cast<std::uint32_t>((in_second ? 0 : s.half()) + rng() % s.half());
    const auto r = link.query(q, tags);
    ASSERT_TRUE(r.ok());
    for (std::size_t i = 0; i < tags.size(); ++i) {
      EXPECT_EQ(r.words[i] >> 24, q & 0xff);
      EXPECT_EQ(r.words[i] & 0xffffff, tags[i]);
    }
  }
}

TEST(Query, ConcurrentReaderNeverSeesOverwrittenWords) {
  HomodyneServer s(kSmall);
  s.set_test_pattern_mode(true);
  const std::uint32_t cap = s.capacity();
  const auto tagged = [cap](std::uint64_t t) { return static_cast<std::uint32_t>(((t / cap) << 24) | (t % cap)); };
  fill(s, s.half() + 8, tagged);
  std::atomic<bool> done{false};
  std::thread writer([&] {
    for (int i = 0; i < 400; ++i) fill(s, 4096, tagged);
    done = true;
  });
  DirectLink link(s);
  std::mt19937_64 rng(12);
  std::size_t ok = 0, bad = 0;
  while (!done) {
    const std::uint64_t ticks = s.ring().ticks();
    const bool in_second = (ticks % cap) >= s.half();
    const std::uint32_t q = RingBuffer::overflow_of(ticks, cap) - (in_second ? 0 : 1);
    std::vector<std::uint32_t> tags(256);
    for (auto& t : tags) t = static_cast<std::uint32_t>((in_second ? 0 : s.half()) + rng() % s.half());
    const auto r = link.query(q, tags);
    if (!r.ok()) continue;
    ++ok;
    for (std::size_t i = 0; i < tags.size(); ++i) bad += (r.words[i] >> 24) != (q & 0xff);
  }
  writer.join();
  EXPECT_GT(ok, 0u);
  EXPECT_EQ(bad, 0u);
}

TEST(Health, QueueOverflowRefusesData) {
  HomodyneServer s(kSmall);
  fill(s, s.half() + 8, sample_word);
  DirectLink link(s);
  EXPECT_TRUE(link.query(0, std::vector<std::uint32_t>{1}).ok());
  s.set_writer_stalled(true);
  fill(s, 8 * (HomodyneServer::kFifoBursts + 4), sample_word);
  s.set_writer_stalled(false);
  EXPECT_NE(s.status().flags & kQueueOverflow, 0u);
  EXPECT_EQ(link.query(0, std::vector<std::uint32_t>{1}).error, ErrorCode::Integrity);
  EXPECT_EQ(s.threshold_scan(0).error, ErrorCode::Integrity);
  // The clock kept running through the lost bursts.
  EXPECT_EQ(s.ring().ticks(), s.half() + 8 + 8 * (HomodyneServer::kFifoBursts + 4));
}

TEST(Health, StalledWriterWithinFifoLosesNothing) {
  HomodyneServer s(kSmall);
  s.set_writer_stalled(true);
  fill(s, 8 * 100 + 3, sample_word);
  EXPECT_EQ(s.ring().ticks(), 0u);
  s.set_writer_stalled(false);
  EXPECT_EQ(s.ring().ticks(), 800u);
  EXPECT_EQ(s.status().flags, 0u);
  EXPECT_EQ(s.status().current_timetag, 803u);
}

TEST(Health, OutOfRangeSampleAndClockLock) {
  HomodyneServer s(kSmall);
  fill(s, s.half() + 8, sample_word);
  EXPECT_EQ(s.status().flags, 0u);
  s.set_clock_locked(false);
  EXPECT_EQ(DirectLink(s).query(0, std::vector<std::uint32_t>{1}).error, ErrorCode::Integrity);
  s.set_clock_locked(true);
  EXPECT_TRUE(DirectLink(s).query(0, std::vector<std::uint32_t>{1}).ok());
  const std::vector<std::uint32_t> junk(8, pack_word(kPlaceholder, 0));
  s.ingest(junk);
  EXPECT_NE(s.status().flags & kSampleOutOfRange, 0u);
  EXPECT_EQ(DirectLink(s).query(0, std::vector<std::uint32_t>{1}).error, ErrorCode::Integrity);
}

TEST(ThresholdScan, ConstantSignalHasNoCrossings) {
  HomodyneServer s(kSmall);
  fill(s, 30000, [](std::uint64_t) { return make_word(-100, 0); });
  s.set_config({1, false, 0, 1});
  const auto r = s.threshold_scan(0);
  EXPECT_EQ(r.error, ErrorCode::None);
  EXPECT_TRUE(r.tags.empty());
}

TEST(ThresholdScan, PulseTrainGivesOneCrossingPerPulse) {
  HomodyneServer s;
  // 100-kHz train of 5-sample pulses: 10^4 pulses in 10^7 samples.
  const auto pulse = [](std::uint64_t t) { return make_word((t % 1000) >= 200 && (t % 1000) < 205 ? 3000 : -20, 0); };
  fill(s, 10000000, pulse);
  s.set_config({1, false, 1500, 1});
  auto r = s.threshold_scan(0);
  ASSERT_EQ(r.error, ErrorCode::None);
  ASSERT_EQ(r.tags.size(), 10000u);
  for (std::size_t i = 0; i < r.tags.size(); ++i) EXPECT_EQ(r.tags[i], 1000 * i + 200);
  s.set_config({1, false, 1500, -1});
  r = s.threshold_scan(0);
  ASSERT_EQ(r.tags.size(), 10000u);
  EXPECT_EQ(r.tags[0], 205u);
}

TEST(ThresholdScan, TriangleWaveSlopesAgree) {
  HomodyneServer s(kSmall);
  const auto tri = [](std::uint64_t t) {
    const int p = static_cast<int>(t % 400);
    return make_word(p < 200 ? p * 20 - 2000 : (400 - p) * 20 - 2000, 0);
  };
  fill(s, 60000, tri);
  for (int thr : {-1500, 0, 7, 1900}) {
    s.set_config({1, false, thr, 1});
    const auto up = s.threshold_scan(0, 0, 60000);
    s.set_config({1, false, thr, -1});
    const auto down = s.threshold_scan(0, 0, 60000);
    ASSERT_EQ(up.error, ErrorCode::None);
    EXPECT_EQ(up.tags.size(), 150u);
    EXPECT_EQ(up.tags.size(), down.tags.size());
  }
}

TEST(ThresholdScan, RefusesOverwrittenOrSpanningRanges) {
  HomodyneServer s(kSmall);
  fill(s, s.capacity() + 1000, sample_word);
  EXPECT_EQ(s.threshold_scan(0, 0, 500).error, ErrorCode::StaleOverflow);
  EXPECT_EQ(s.threshold_scan(0, 2000, s.capacity() + 10).error, ErrorCode::StaleOverflow);
  EXPECT_EQ(s.threshold_scan(0, 2000, s.capacity()).error, ErrorCode::None);
  EXPECT_EQ(s.threshold_scan(1, 0, 1000).error, ErrorCode::None);
  EXPECT_EQ(s.threshold_scan(1, 0, 1001).error, ErrorCode::StaleOverflow);
  EXPECT_EQ(s.threshold_scan(7).error, ErrorCode::StaleOverflow);
}

TEST(Control, CommandsRoundTrip) {
  HomodyneServer s(kSmall);
  EXPECT_EQ(handle_control(s, "*idn?"), "PSGEN,HDS,hds,1");
  EXPECT_EQ(handle_control(s, "STAT?"), "OVF=0 TIME=0 FLAGS=0x0");
  EXPECT_EQ(handle_control(s, "CONF:WIN 16"), "OK");
  EXPECT_EQ(handle_control(s, "conf:win?"), "16");
  EXPECT_EQ(handle_control(s, "CONF:WIN 0").rfind("ERR", 0), 0u);
  EXPECT_EQ(handle_control(s, "CONF:SLOPE ON"), "OK");
  EXPECT_EQ(handle_control(s, "CONF:SLOPE?"), "ON");
  EXPECT_EQ(handle_control(s, "CONF:THR -250"), "OK");
  EXPECT_EQ(handle_control(s, "CONF:THR?"), "-250");
  EXPECT_EQ(handle_control(s, "CONF:THRSLOPE NEG"), "OK");
  EXPECT_EQ(handle_control(s, "CONF:THRSLOPE?"), "NEG");
  EXPECT_EQ(handle_control(s, "BOGUS").rfind("ERR", 0), 0u);
  EXPECT_EQ(handle_control(s, "FAULT:QUEUE"), "OK");
  EXPECT_EQ(handle_control(s, "STAT?"), "OVF=0 TIME=0 FLAGS=0x1");
  EXPECT_EQ(handle_control(s, "FAULT:CLEAR"), "OK");
  fill(s, 1000, [](std::uint64_t t) { return make_word(t == 500 ? -1000 : 0, 0); });
  EXPECT_EQ(handle_control(s, "TIME?"), "1000");
  EXPECT_EQ(parse_scan_reply(handle_control(s, "SCAN? 0")), std::vector<std::uint32_t>{500});
  EXPECT_EQ(parse_scan_reply(handle_control(s, "SCAN? 0 0 400")), std::vector<std::uint32_t>{});
  EXPECT_EQ(handle_control(s, "SCAN? 3"), "ERR stale-overflow");
}

TEST(TestVectorFile, WriteReadReplay) {
  const auto v = ramp_vector(kSmall, 100, 3000);
  std::stringstream ss;
  write_test_vector(ss, v);
  const auto back = read_test_vector(ss);
  EXPECT_EQ(back.pairs, v.pairs);
  EXPECT_EQ(back.geometry.capacity(), kSmall.capacity());
  HomodyneServer s(kSmall);
  s.set_test_pattern_mode(true);
  replay(s, back);
  DirectLink link(s);
  const auto c = verify(link, back);
  EXPECT_EQ(c.mismatches, 0u);
  EXPECT_EQ(c.checked, 3000u);

  std::stringstream bad("geometry 64 1024\n5 0000000a\n4 0000000b\n");
  EXPECT_THROW(read_test_vector(bad), FormatError);
}

TEST(TestVectorFile, SecondHalfReplay) {
  TestVector v{kSmall, 2, {}};
  for (std::uint32_t t = kSmall.half() + 10; t < kSmall.half() + 2500; t += 3) v.pairs.emplace_back(t, make_word(t % 8000, -7));
  HomodyneServer s(kSmall);
  replay(s, v, make_word(0, 0));
  DirectLink link(s);
  const auto c = verify(link, v);
  EXPECT_EQ(c.error, ErrorCode::None);
  EXPECT_EQ(c.mismatches, 0u);
  EXPECT_EQ(s.status().overflow, 3u);
}

TEST(Transport, TcpMatchesDirectLink) {
  HomodyneServer s;
  s.set_test_pattern_mode(true);
  const auto v = ramp_vector(Geometry{}, 5000, 40000);
  replay(s, v);
  TcpServer server(s, "hds-a");
  server.start();
  TcpLink tcp("127.0.0.1", server.data_port(), server.control_port());
  EXPECT_EQ(tcp.control("*IDN?"), "PSGEN,HDS,hds-a,1");
  const auto c = verify(tcp, v);  // 40000 tags: three messages
  EXPECT_EQ(c.error, ErrorCode::None);
  EXPECT_EQ(c.mismatches, 0u);
  EXPECT_EQ(tcp.status().overflow, 0u);
  // The request is still open, so a bare word is a continuation timetag.
  const std::vector<std::uint32_t> bad{0xdeadbeef};
  EXPECT_EQ(tcp.exchange(bad).error, ErrorCode::TimetagRange);
  EXPECT_EQ(tcp.exchange(bad).error, ErrorCode::KeywordMismatch);
  EXPECT_EQ(tcp.query(1, std::vector<std::uint32_t>{3}).error, ErrorCode::StaleOverflow);
  server.stop();
}
