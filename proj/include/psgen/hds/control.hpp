#pragma once

// Line-oriented control channel. Commands are case-insensitive; replies are a
// single line starting with a value, "OK" or "ERR <reason>".
//
//   *IDN?                        identification
//   STAT?                        OVF=<n> TIME=<t> FLAGS=0x<hex>
//   OVF?  TIME?                  single counters
//   CONF:WIN <w> | CONF:WIN?     integration window, 1..1024
//   CONF:SLOPE ON|OFF | ?        slope-check mode
//   CONF:THR <code> | ?          threshold-scan level
//   CONF:THRSLOPE POS|NEG | ?    threshold-scan slope
//   SCAN? <ovf> [<begin> <end>]  threshold crossings: "<count> t1 t2 ..." or "ERR <code>"
//   CLOCK:LOCK ON|OFF            clock-lock emulation
//   FAULT:QUEUE                  inject a queue overflow
//   FAULT:CLEAR                  clear latched health flags

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "psgen/hds/server.hpp"

namespace psgen::hds {

namespace detail {

inline std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

inline std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace detail

inline std::string handle_control(HomodyneServer& server, std::string_view line, std::string_view name = "hds") {
  using detail::parse_number;
  const auto args = detail::split_words(line);
  if (args.empty()) return "ERR empty command";
  const std::string cmd = detail::upper(args[0]);
  const auto arg = [&](std::size_t i) { return i < args.size() ? detail::upper(args[i]) : std::string(); };

  if (cmd == "*IDN?") return "PSGEN,HDS," + std::string(name) + ",1";
  if (cmd == "STAT?") {
    const Status s = server.status();
    char buf[96];
    std::snprintf(buf, sizeof buf, "OVF=%u TIME=%u FLAGS=0x%x", s.overflow, s.current_timetag, s.flags);
    return buf;
  }
  if (cmd == "OVF?") return std::to_string(server.status().overflow);
  if (cmd == "TIME?") return std::to_string(server.status().current_timetag);

  ServerConfig cfg = server.config();
  if (cmd == "CONF:WIN?") return std::to_string(cfg.window);
  if (cmd == "CONF:SLOPE?") return cfg.slope_check ? "ON" : "OFF";
  if (cmd == "CONF:THR?") return std::to_string(cfg.threshold);
  if (cmd == "CONF:THRSLOPE?") return cfg.threshold_slope > 0 ? "POS" : "NEG";
  if (cmd == "CONF:WIN") {
    std::uint32_t w = 0;
    if (args.size() != 2 || !parse_number(args[1], w) || w < 1 || w > HomodyneServer::kMaxWindow) return "ERR window must be 1..1024";
    cfg.window = w;
  } else if (cmd == "CONF:SLOPE") {
    if (arg(1) != "ON" && arg(1) != "OFF") return "ERR expected ON or OFF";
    cfg.slope_check = arg(1) == "ON";
  } else if (cmd == "CONF:THR") {
    int v = 0;
    if (args.size() != 2 || !parse_number(args[1], v) || v < kSampleMin || v > kSampleMax) return "ERR threshold must be -8192..8191";
    cfg.threshold = v;
  } else if (cmd == "CONF:THRSLOPE") {
    if (arg(1) != "POS" && arg(1) != "NEG") return "ERR expected POS or NEG";
    cfg.threshold_slope = arg(1) == "POS" ? 1 : -1;
  } else if (cmd == "SCAN?") {
    std::uint32_t q = 0, b = 0, e = 0;
    if (args.size() != 2 && args.size() != 4) return "ERR usage: SCAN? <ovf> [<begin> <end>]";
    if (!parse_number(args[1], q)) return "ERR bad overflow number";
    ScanResult r;
    if (args.size() == 4) {
      if (!parse_number(args[2], b) || !parse_number(args[3], e)) return "ERR bad range";
      r = server.threshold_scan(q, b, e);
    } else {
      r = server.threshold_scan(q);
    }
    if (r.error != ErrorCode::None) return std::string("ERR ") + to_string(r.error);
    std::string out = std::to_string(r.tags.size());
    out.reserve(out.size() + 10 * r.tags.size());
    for (auto t : r.tags) {
      out += ' ';
      out += std::to_string(t);
    }
    return out;
  } else if (cmd == "CLOCK:LOCK") {
    if (arg(1) != "ON" && arg(1) != "OFF") return "ERR expected ON or OFF";
    server.set_clock_locked(arg(1) == "ON");
    return "OK";
  } else if (cmd == "FAULT:QUEUE") {
    server.inject_queue_overflow();
    return "OK";
  } else if (cmd == "FAULT:CLEAR") {
    server.clear_faults();
    return "OK";
  } else {
    return "ERR unknown command " + args[0];
  }
  server.set_config(cfg);
  return "OK";
}

/// Parses a SCAN? reply.
inline std::vector<std::uint32_t> parse_scan_reply(const std::string& reply) {
  if (reply.rfind("ERR", 0) == 0) throw AcquisitionError("threshold scan failed: " + reply);
  std::istringstream is(reply);
  std::size_t n = 0;
  if (!(is >> n)) throw FormatError("malformed scan reply");
  std::vector<std::uint32_t> tags(n);
  for (auto& t : tags)
    if (!(is >> t)) throw FormatError("scan reply shorter than its count");
  return tags;
}

}  // namespace psgen::hds
