#pragma once

// Binary query protocol. Every message on the stream is a 32-bit little-endian
// word count followed by that many words.
//
// Request, first message:    keyword, overflow_number, timetag...
// Request, continuation:     timetag...   (same overflow_number until the next keyword)
// Data response:             keyword, overflow_number, count, word[count]
// Error response:            error keyword, code, overflow_number, detail
//
// Every request message gets exactly one response frame.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/hds/word.hpp"

namespace psgen::hds {

static_assert(std::endian::native == std::endian::little, "wire framing assumes a little-endian host");

enum class ErrorCode : std::uint32_t {
  None = 0,
  KeywordMismatch = 1,  // no open request and the message does not start with the keyword
  StaleOverflow = 2,    // overflow number not readable (overwritten, foreign or overwritten mid-read)
  HalfViolation = 3,    // sample lies in the half still being written
  TimetagRange = 4,     // timetag >= capacity
  Integrity = 5,        // health fault: queue overflow, out-of-range sample or clock unlocked
  Malformed = 6,        // empty message or truncated header
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::None: return "none";
    case ErrorCode::KeywordMismatch: return "keyword-mismatch";
    case ErrorCode::StaleOverflow: return "stale-overflow";
    case ErrorCode::HalfViolation: return "half-violation";
    case ErrorCode::TimetagRange: return "timetag-range";
    case ErrorCode::Integrity: return "integrity";
    case ErrorCode::Malformed: return "malformed";
  }
  return "unknown";
}

struct Response {
  ErrorCode error = ErrorCode::None;
  std::uint32_t overflow = 0;
  std::uint32_t detail = 0;          // offending timetag for errors
  std::vector<std::uint32_t> words;  // data payload

  bool ok() const { return error == ErrorCode::None; }

  static Response failure(ErrorCode code, std::uint32_t overflow, std::uint32_t detail = 0) {
    return {code, overflow, detail, {}};
  }
};

inline std::vector<std::uint32_t> encode_request(std::uint32_t overflow, std::span<const std::uint32_t> tags) {
  std::vector<std::uint32_t> out;
  out.reserve(tags.size() + 2);
  out.push_back(kKeyword);
  out.push_back(overflow);
  out.insert(out.end(), tags.begin(), tags.end());
  return out;
}

inline std::vector<std::uint32_t> encode_response(const Response& r) {
  if (!r.ok()) return {kErrorKeyword, static_cast<std::uint32_t>(r.error), r.overflow, r.detail};
  std::vector<std::uint32_t> out;
  out.reserve(r.words.size() + 3);
  out.push_back(kKeyword);
  out.push_back(r.overflow);
  out.push_back(static_cast<std::uint32_t>(r.words.size()));
  out.insert(out.end(), r.words.begin(), r.words.end());
  return out;
}

inline Response decode_response(std::span<const std::uint32_t> frame) {
  if (frame.size() >= 4 && frame[0] == kErrorKeyword) {
    if (frame.size() != 4) throw FormatError("error frame must be 4 words");
    if (frame[1] == 0 || frame[1] > static_cast<std::uint32_t>(ErrorCode::Malformed)) throw FormatError("unknown error code");
    return Response::failure(static_cast<ErrorCode>(frame[1]), frame[2], frame[3]);
  }
  if (frame.size() < 3 || frame[0] != kKeyword) throw FormatError("response frame without keyword header");
  if (frame.size() - 3 != frame[2]) throw FormatError("response count does not match payload");
  Response r;
  r.overflow = frame[1];
  r.words.assign(frame.begin() + 3, frame.end());
  return r;
}

/// Length-prefixed byte image of a message.
inline std::string frame_bytes(std::span<const std::uint32_t> words) {
  std::string out(4 * (words.size() + 1), '\0');
  const auto n = static_cast<std::uint32_t>(words.size());
  std::memcpy(out.data(), &n, 4);
  if (!words.empty()) std::memcpy(out.data() + 4, words.data(), 4 * words.size());
  return out;
}

}  // namespace psgen::hds
