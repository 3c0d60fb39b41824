#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <deque>
#include <limits>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "psgen/hds/protocol.hpp"
#include "psgen/hds/ring_buffer.hpp"
#include "psgen/hds/word.hpp"

namespace psgen::hds {

struct ServerConfig {
  std::uint32_t window = 1;      // integration window in samples
  bool slope_check = false;      // replace flyback samples by the placeholder
  int threshold = 0;             // threshold-scan level (homodyne half)
  int threshold_slope = +1;      // +1 rising, -1 falling
};

enum HealthFlag : std::uint32_t {
  kQueueOverflow = 1u << 0,
  kSampleOutOfRange = 1u << 1,
  kClockUnlocked = 1u << 2,
  kIntegrationSaturated = 1u << 3,  // informational, does not refuse queries
};

inline constexpr std::uint32_t kRefusingFlags = kQueueOverflow | kSampleOutOfRange | kClockUnlocked;

struct Status {
  std::uint32_t overflow = 0;
  std::uint32_t current_timetag = 0;
  std::uint32_t flags = 0;
};

struct ScanResult {
  ErrorCode error = ErrorCode::None;
  std::vector<std::uint32_t> tags;
};

/// Per-connection parser state for multi-message requests.
struct Session {
  bool open = false;
  std::uint32_t overflow = 0;
};

/// Homodyne detection server: paged sample ring, health flags and query engine.
///
/// Ingest is single-writer and moves 8-word bursts through a bounded FIFO.
/// Queries may run concurrently with ingest but only touch the sealed half:
/// the half the writer left most recently. A query re-reads the clock after
/// copying and reports staleness if the writer wrapped into that half meanwhile.
class HomodyneServer {
 public:
  static constexpr std::size_t kBurst = 8;
  static constexpr std::size_t kFifoBursts = 512;
  static constexpr std::uint32_t kMaxWindow = 1024;

  explicit HomodyneServer(Geometry g = {}, std::uint64_t page_seed = 0x5eed) : ring_(g, page_seed) {}

  const RingBuffer& ring() const { return ring_; }
  std::uint32_t capacity() const { return ring_.capacity(); }
  std::uint32_t half() const { return ring_.geometry().half(); }

  /// Test-pattern mode stores arbitrary 32-bit words (e.g. the timetag itself)
  /// without flagging them as out-of-range samples.
  void set_test_pattern_mode(bool on) { test_pattern_.store(on); }

  // ---- configuration -----------------------------------------------------

  ServerConfig config() const {
    std::shared_lock lock(config_mutex_);
    return config_;
  }

  void set_config(const ServerConfig& c) {
    if (c.window < 1 || c.window > kMaxWindow) throw DomainError("integration window must be in [1, 1024]");
    if (c.threshold_slope != 1 && c.threshold_slope != -1) throw DomainError("threshold slope must be +1 or -1");
    std::unique_lock lock(config_mutex_);
    config_ = c;
  }

  // ---- ingest ------------------------------------------------------------

  /// Accepts samples in timetag order starting at the current clock.
  void ingest(std::span<const std::uint32_t> words) {
    std::lock_guard lock(writer_mutex_);
    if (!test_pattern_.load(std::memory_order_relaxed)) {
      for (std::uint32_t w : words)
        if (!is_valid_word(w)) {
          flags_.fetch_or(kSampleOutOfRange);
          break;
        }
    }
    std::size_t i = 0;
    // Complete a partial burst first.
    while (staged_count_ > 0 && i < words.size()) {
      staged_[staged_count_++] = words[i++];
      if (staged_count_ == kBurst) {
        push_burst(staged_);
        staged_count_ = 0;
      }
    }
    // Whole bursts straight through when the writer keeps up.
    const std::size_t whole = (words.size() - i) / kBurst * kBurst;
    if (whole > 0) {
      if (!stalled_ && fifo_.empty()) {
        ring_.write(words.subspan(i, whole));
      } else {
        for (std::size_t k = 0; k < whole; k += kBurst) {
          std::array<std::uint32_t, kBurst> b;
          std::copy_n(words.begin() + static_cast<std::ptrdiff_t>(i + k), kBurst, b.begin());
          push_burst(b);
        }
      }
      i += whole;
    }
    while (i < words.size()) staged_[staged_count_++] = words[i++];
    accepted_ += words.size();
  }

  /// Fault injection: while stalled, bursts pile up in the FIFO; a full FIFO
  /// drops the burst (the clock still advances) and latches kQueueOverflow.
  void set_writer_stalled(bool stalled) {
    std::lock_guard lock(writer_mutex_);
    stalled_ = stalled;
    if (!stalled_) drain();
  }

  void inject_queue_overflow() { flags_.fetch_or(kQueueOverflow); }
  void set_clock_locked(bool locked) {
    if (locked) flags_.fetch_and(~kClockUnlocked);
    else flags_.fetch_or(kClockUnlocked);
  }
  void clear_faults() { flags_.store(0); }

  // ---- status ------------------------------------------------------------

  /// Words accepted so far, including those still staged or queued.
  std::uint64_t accepted() const {
    std::lock_guard lock(writer_mutex_);
    return accepted_;
  }

  Status status() const {
    std::lock_guard lock(writer_mutex_);
    return {RingBuffer::overflow_of(accepted_, capacity()), static_cast<std::uint32_t>(accepted_ % capacity()), flags_.load()};
  }

  // ---- queries -----------------------------------------------------------

  /// Readability of timetag `tag` under overflow number `q` at clock `ticks`.
  ErrorCode classify(std::uint32_t q, std::uint32_t tag, std::uint64_t ticks) const {
    if (tag >= capacity()) return ErrorCode::TimetagRange;
    const std::uint32_t cap = capacity();
    const std::uint32_t h = tag / half();
    const std::uint32_t hc = static_cast<std::uint32_t>(ticks % cap) / half();
    const std::uint32_t o = RingBuffer::overflow_of(ticks, cap);
    const std::uint32_t behind = (o - q) & kOverflowMask;
    if (behind == 0) return (h == 0 && hc == 1) ? ErrorCode::None : ErrorCode::HalfViolation;
    if (behind == 1 && ticks >= cap && h == 1 && hc == 0) return ErrorCode::None;
    return ErrorCode::StaleOverflow;
  }

  /// One response per message; updates the session's open request.
  Response handle(Session& session, std::span<const std::uint32_t> message) const {
    if (message.empty()) return Response::failure(ErrorCode::Malformed, session.overflow);
    std::span<const std::uint32_t> tags = message;
    if (message[0] == kKeyword) {
      if (message.size() < 2) {
        session.open = false;
        return Response::failure(ErrorCode::Malformed, 0);
      }
      session.open = true;
      session.overflow = message[1];
      tags = message.subspan(2);
    } else if (!session.open) {
      return Response::failure(ErrorCode::KeywordMismatch, 0, message[0]);
    }
    Response r = query(session.overflow, tags);
    if (!r.ok()) session.open = false;
    return r;
  }

  /// Core query: one response word per timetag, or a single typed error.
  Response query(std::uint32_t q, std::span<const std::uint32_t> tags) const {
    if (flags_.load() & kRefusingFlags) return Response::failure(ErrorCode::Integrity, q);
    const ServerConfig cfg = config();
    const std::uint64_t before = ring_.ticks();
    for (std::uint32_t t : tags) {
      ErrorCode e = classify(q, t, before);
      if (e == ErrorCode::None && cfg.window > 1) {
        // The whole window must stay in the same sealed half.
        const std::uint64_t last = static_cast<std::uint64_t>(t) + cfg.window - 1;
        if (last >= capacity() || last / half() != t / half()) e = ErrorCode::HalfViolation;
      }
      if (e != ErrorCode::None) return Response::failure(e, q, t);
    }
    Response r;
    r.overflow = q;
    r.words.reserve(tags.size());
    bool saturated = false;
    for (std::uint32_t t : tags) r.words.push_back(read_processed(t, cfg, saturated));
    if (saturated) flags_.fetch_or(kIntegrationSaturated);
    // Seqlock-style validation: the writer may have wrapped into the half while copying.
    const std::uint64_t after = ring_.ticks();
    if (after != before && !tags.empty()) {
      for (std::uint32_t t : tags)
        if (classify(q, t, after) != ErrorCode::None) return Response::failure(ErrorCode::StaleOverflow, q, t);
    }
    return r;
  }

  /// All timetags in [begin, end) of epoch q where the homodyne sample crosses
  /// the configured threshold with the configured slope. A crossing at t means
  /// sample(t-1) < thr <= sample(t) (rising) or sample(t-1) >= thr > sample(t)
  /// (falling); both pair samples must lie in the range.
  ScanResult threshold_scan(std::uint32_t q, std::uint32_t begin, std::uint32_t end) const {
    if (flags_.load() & kRefusingFlags) return {ErrorCode::Integrity, {}};
    if (end > capacity() || begin > end) return {ErrorCode::StaleOverflow, {}};
    const ServerConfig cfg = config();
    const std::uint64_t before = ring_.ticks();
    if (!intact(q, begin, end, before)) return {ErrorCode::StaleOverflow, {}};
    ScanResult out;
    if (end - begin < 2) return out;
    int prev = homodyne_sample(ring_.read(begin));
    for (std::uint32_t t = begin + 1; t < end; ++t) {
      const int cur = homodyne_sample(ring_.read(t));
      const bool hit = cfg.threshold_slope > 0 ? (prev < cfg.threshold && cur >= cfg.threshold)
                                               : (prev >= cfg.threshold && cur < cfg.threshold);
      if (hit) out.tags.push_back(t);
      prev = cur;
    }
    if (!intact(q, begin, end, ring_.ticks())) return {ErrorCode::StaleOverflow, {}};
    return out;
  }

  /// Scan over everything still intact for epoch q.
  ScanResult threshold_scan(std::uint32_t q) const {
    const std::uint64_t ticks = ring_.ticks();
    const std::uint32_t cap = capacity();
    const std::uint32_t c = static_cast<std::uint32_t>(ticks % cap);
    const std::uint32_t o = RingBuffer::overflow_of(ticks, cap);
    const std::uint32_t behind = (o - q) & kOverflowMask;
    if (behind == 0) return threshold_scan(q, 0, c);
    if (behind == 1 && ticks >= cap) return threshold_scan(q, c, cap);
    return {ErrorCode::StaleOverflow, {}};
  }

 private:
  bool intact(std::uint32_t q, std::uint32_t begin, std::uint32_t end, std::uint64_t ticks) const {
    const std::uint32_t cap = capacity();
    const std::uint32_t c = static_cast<std::uint32_t>(ticks % cap);
    const std::uint32_t behind = (RingBuffer::overflow_of(ticks, cap) - q) & kOverflowMask;
    if (behind == 0) return end <= c;
    if (behind == 1 && ticks >= cap) return begin >= c;
    return false;
  }

  static bool in_ramp(std::uint32_t t, std::uint32_t first, std::uint32_t last, const RingBuffer& ring) {
    // Compare with the previous sample, or the next one at the start of the half.
    if (t > first) return phase_sample(ring.read(t)) >= phase_sample(ring.read(t - 1));
    if (t < last) return phase_sample(ring.read(t + 1)) >= phase_sample(ring.read(t));
    return true;
  }

  std::uint32_t read_processed(std::uint32_t t, const ServerConfig& cfg, bool& saturated) const {
    std::uint32_t w;
    if (cfg.window == 1) {
      w = ring_.read(t);
    } else {
      long sa = 0, sb = 0;
      for (std::uint32_t k = 0; k < cfg.window; ++k) {
        const std::uint32_t v = ring_.read(t + k);
        sa += homodyne_sample(v);
        sb += phase_sample(v);
      }
      // Saturate to +-32767 so a sum never collides with the placeholder.
      const auto sat = [&](long v) {
        if (v > 32767 || v < -32767) saturated = true;
        return static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32767L, 32767L)));
      };
      w = pack_word(sat(sa), sat(sb));
    }
    if (cfg.slope_check) {
      const std::uint32_t first = t / half() * half();
      if (!in_ramp(t, first, first + half() - 1, ring_)) w = pack_word(kPlaceholder, low_half(w));
    }
    return w;
  }

  void push_burst(const std::array<std::uint32_t, kBurst>& b) {
    if (!stalled_ && fifo_.empty()) {
      ring_.write(b);
      return;
    }
    if (fifo_.size() >= kFifoBursts || lost_bursts_ > 0) {
      // Lost: the ADC clock moves on but memory keeps stale words.
      flags_.fetch_or(kQueueOverflow);
      ++lost_bursts_;
    } else {
      fifo_.push_back(b);
    }
    if (!stalled_) drain();
  }

  void drain() {
    while (!fifo_.empty()) {
      ring_.write(fifo_.front());
      fifo_.pop_front();
    }
    ring_.skip(lost_bursts_ * kBurst);
    lost_bursts_ = 0;
  }

  RingBuffer ring_;
  mutable std::shared_mutex config_mutex_;
  ServerConfig config_;
  mutable std::mutex writer_mutex_;
  std::array<std::uint32_t, kBurst> staged_{};
  std::size_t staged_count_ = 0;
  std::deque<std::array<std::uint32_t, kBurst>> fifo_;
  std::uint64_t lost_bursts_ = 0;
  bool stalled_ = false;
  std::uint64_t accepted_ = 0;
  std::atomic<bool> test_pattern_{false};
  mutable std::atomic<std::uint32_t> flags_{0};
};

}  // namespace psgen::hds
