#pragma once

// Run console. One command per line, case-insensitive, replies "OK", a value
// line or "ERR <reason>". Changes take effect at the next settings snapshot.
//
//   ZDR <rate>                        zero-detection samples per overflow period (<= 131072)
//   DELAY <dA> <dB>                   per-mode HDS delays in coarse bins
//   HOLD <bins>                       hold time in coarse bins
//   SEED <offset> <width> <period>    seed-rejection window
//   MODE SINGLES|COINC                capture mode
//   KEEPLEADER ON|OFF                 keep the leading event on a hold violation
//   SETTINGS?                         one line with every setting
//   STOP                              ask the acquisition loop to finish

#include <cstdint>
#include <cstdio>
#include <mutex>
#include <string>
#include <string_view>

#include "psgen/hds/control.hpp"
#include "psgen/pso/filters.hpp"

namespace psgen::pso {

struct RunSettings {
  std::int64_t delay_a = 0;
  std::int64_t delay_b = 0;
  std::int64_t hold = 3;
  bool keep_leader = false;
  SeedWindow seed{0, 0, 1};
  CaptureMode mode = CaptureMode::coincidence;
  std::uint64_t zdr_rate = 0;
  bool stop = false;
};

/// Settings shared between the console and the acquisition loop.
class SharedSettings {
 public:
  explicit SharedSettings(RunSettings s = {}) : s_(s) {}

  RunSettings snapshot() const {
    std::lock_guard lock(m_);
    return s_;
  }

  template <typename F>
  void update(F&& f) {
    std::lock_guard lock(m_);
    f(s_);
    ++version_;
  }

  std::uint64_t version() const {
    std::lock_guard lock(m_);
    return version_;
  }

 private:
  mutable std::mutex m_;
  RunSettings s_;
  std::uint64_t version_ = 0;
};

inline std::string describe(const RunSettings& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "DELAY=%lld,%lld HOLD=%lld KEEPLEADER=%s SEED=%lld,%lld,%lld MODE=%s ZDR=%llu%s",
                static_cast<long long>(s.delay_a), static_cast<long long>(s.delay_b),
                static_cast<long long>(s.hold), s.keep_leader ? "ON" : "OFF", static_cast<long long>(s.seed.offset),
                static_cast<long long>(s.seed.width), static_cast<long long>(s.seed.period),
                s.mode == CaptureMode::singles ? "SINGLES" : "COINC", static_cast<unsigned long long>(s.zdr_rate),
                s.stop ? " STOP" : "");
  return buf;
}

inline std::string handle_console(SharedSettings& settings, std::string_view line) {
  using hds::detail::parse_number;
  const auto args = hds::detail::split_words(line);
  if (args.empty()) return "ERR empty command";
  const std::string cmd = hds::detail::upper(args[0]);
  const auto want = [&](std::size_t n) { return args.size() == n + 1; };
  if (cmd == "SETTINGS?") return describe(settings.snapshot());
  if (cmd == "STOP") {
    settings.update([](RunSettings& s) { s.stop = true; });
    return "OK";
  }
  if (cmd == "ZDR") {
    std::uint64_t r = 0;
    if (!want(1) || !parse_number(args[1], r)) return "ERR usage: ZDR <rate>";
    if (r > kMaxZeroDetectionRate) return "ERR rate above 131072 per period";
    settings.update([&](RunSettings& s) { s.zdr_rate = r; });
    return "OK";
  }
  if (cmd == "DELAY") {
    std::int64_t a = 0, b = 0;
    if (!want(2) || !parse_number(args[1], a) || !parse_number(args[2], b)) return "ERR usage: DELAY <dA> <dB>";
    settings.update([&](RunSettings& s) {
      s.delay_a = a;
      s.delay_b = b;
    });
    return "OK";
  }
  if (cmd == "HOLD") {
    std::int64_t h = 0;
    if (!want(1) || !parse_number(args[1], h) || h < 0) return "ERR usage: HOLD <bins>";
    settings.update([&](RunSettings& s) { s.hold = h; });
    return "OK";
  }
  if (cmd == "SEED") {
    SeedWindow w;
    if (!want(3) || !parse_number(args[1], w.offset) || !parse_number(args[2], w.width) ||
        !parse_number(args[3], w.period))
      return "ERR usage: SEED <offset> <width> <period>";
    try {
      w.validate();
    } catch (const Error& e) {
      return std::string("ERR ") + e.what();
    }
    settings.update([&](RunSettings& s) { s.seed = w; });
    return "OK";
  }
  if (cmd == "MODE") {
    const std::string m = want(1) ? hds::detail::upper(args[1]) : "";
    if (m != "SINGLES" && m != "COINC") return "ERR usage: MODE SINGLES|COINC";
    settings.update([&](RunSettings& s) { s.mode = m == "SINGLES" ? CaptureMode::singles : CaptureMode::coincidence; });
    return "OK";
  }
  if (cmd == "KEEPLEADER") {
    const std::string m = want(1) ? hds::detail::upper(args[1]) : "";
    if (m != "ON" && m != "OFF") return "ERR usage: KEEPLEADER ON|OFF";
    settings.update([&](RunSettings& s) { s.keep_leader = m == "ON"; });
    return "OK";
  }
  return "ERR unknown command " + args[0];
}

}  // namespace psgen::pso
