#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/pso/pipeline.hpp"

namespace psgen::pso {

enum class CaptureMode { singles, coincidence };

/// Singles mode keeps every event; coincidence mode needs counts on both sides.
inline bool mode_accepts(CaptureMode mode, const Signature& s) {
  return mode == CaptureMode::singles || s.coincident();
}

struct SeedWindow {
  std::int64_t offset = 0;
  std::int64_t width = 0;
  std::int64_t period = 1;

  void validate() const {
    if (period < 1) throw DomainError("seed period must be positive");
    if (width < 0 || width >= period) throw DomainError("seed window width must be in [0, period)");
    if (offset < 0 || offset >= period) throw DomainError("seed window offset must be in [0, period)");
  }

  /// True when the coarse timetag falls inside the rejection window (which may wrap).
  bool rejects(std::int64_t coarse) const {
    if (width == 0) return false;
    std::int64_t phase = coarse % period;
    if (phase < 0) phase += period;
    std::int64_t rel = phase - offset;
    if (rel < 0) rel += period;
    return rel < width;
  }
};

inline std::vector<Event> seed_rejection_filter(std::span<const Event> events, const SeedWindow& w) {
  w.validate();
  std::vector<Event> out;
  out.reserve(events.size());
  for (const auto& e : events)
    if (!w.rejects(e.coarse)) out.push_back(e);
  return out;
}

/// Streaming hold-time filter over time-ordered events.
///
/// Two events whose coarse timetags differ by at most `hold` are both dropped.
/// With keep_leader set only the follower is dropped. An event is released
/// once a later event (or flush) shows nothing follows within the hold time.
class HoldFilter {
 public:
  explicit HoldFilter(std::int64_t hold = 3, bool keep_leader = false) : hold_(hold), keep_leader_(keep_leader) {
    if (hold < 0) throw DomainError("hold time must be non-negative");
  }

  /// Returns the event released by this push, if any.
  std::optional<Event> push(const Event& e) {
    if (have_last_ && e.coarse < last_coarse_) throw DomainError("hold filter needs time-ordered events");
    std::optional<Event> released;
    const bool close = have_last_ && e.coarse - last_coarse_ <= hold_;
    if (close) {
      if (candidate_) {
        if (keep_leader_) {
          released = candidate_;
        } else {
          ++dropped_;
        }
        candidate_.reset();
      }
      ++dropped_;  // the newcomer
    } else {
      if (candidate_) released = candidate_;
      candidate_ = e;
    }
    // A dropped follower still blocks events close behind it.
    have_last_ = true;
    last_coarse_ = e.coarse;
    return released;
  }

  std::optional<Event> flush() {
    std::optional<Event> out;
    out.swap(candidate_);
    return out;
  }

  std::uint64_t dropped() const { return dropped_; }
  std::int64_t hold() const { return hold_; }

 private:
  std::int64_t hold_;
  bool keep_leader_;
  bool have_last_ = false;
  std::int64_t last_coarse_ = 0;
  std::optional<Event> candidate_;
  std::uint64_t dropped_ = 0;
};

inline std::vector<Event> hold_time_filter(std::span<const Event> events, std::int64_t hold = 3,
                                           bool keep_leader = false) {
  HoldFilter f(hold, keep_leader);
  std::vector<Event> out;
  for (const auto& e : events)
    if (auto r = f.push(e)) out.push_back(*r);
  if (auto r = f.flush()) out.push_back(*r);
  return out;
}

inline constexpr std::uint64_t kMaxZeroDetectionRate = 1u << 17;

struct ZeroDetectionPlan {
  std::vector<std::int64_t> tags;  // absolute coarse ticks, ascending
  std::uint64_t attempts = 0;
  std::uint64_t suppressed = 0;    // attempts too close to an event
  bool infeasible = false;         // more than 1% suppressed: gaps are too short for the rate
};

/// Evenly spaced unheralded timetags, `rate` per period of `period` ticks.
///
/// Attempt j of the period starting at p0 sits at p0 + floor(j * period / rate).
/// Attempts in [begin, end) that lie within `hold` of any event are skipped;
/// `events` must cover [begin - hold, end + hold) and be ascending.
inline ZeroDetectionPlan zero_detection_sampler(std::uint64_t rate, std::int64_t period, std::int64_t begin,
                                                std::int64_t end, std::span<const std::int64_t> events,
                                                std::int64_t hold) {
  if (rate > kMaxZeroDetectionRate) throw DomainError("zero-detection rate above 2^17 per period");
  if (period < 1) throw DomainError("period must be positive");
  ZeroDetectionPlan plan;
  if (rate == 0 || end <= begin) return plan;
  const auto r = static_cast<std::int64_t>(rate);
  const auto attempt_at = [&](std::int64_t idx) {
    const std::int64_t p = idx >= 0 ? idx / r : -((-idx + r - 1) / r);
    const std::int64_t j = idx - p * r;
    return p * period + (j * period) / r;
  };
  // First attempt index at or after begin.
  std::int64_t idx = (begin / period) * r;
  if (begin < 0) idx = ((begin - period + 1) / period) * r;
  while (attempt_at(idx) < begin) ++idx;
  std::size_t e = 0;
  for (std::int64_t t = attempt_at(idx); t < end; t = attempt_at(++idx)) {
    ++plan.attempts;
    while (e < events.size() && events[e] < t - hold) ++e;
    if (e < events.size() && events[e] <= t + hold) {
      ++plan.suppressed;
      continue;
    }
    plan.tags.push_back(t);
  }
  plan.infeasible = plan.suppressed * 100 > plan.attempts;
  return plan;
}

}  // namespace psgen::pso
