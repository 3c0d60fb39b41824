#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/pso/centroid.hpp"
#include "psgen/pso/signature.hpp"

namespace psgen::pso {

/// Rising edge of one photon detector on the 300-MHz sub-bin grid.
struct DetectorPulse {
  int side = 0;  // 0 = A, 1 = B
  int tree = 0;  // detector index in the 3-way tree, 0..2
  std::int64_t subbin = 0;

  friend bool operator==(const DetectorPulse&, const DetectorPulse&) = default;
};

/// Candidate detection event from the sub-bin pipeline.
struct Event {
  std::int64_t coarse = 0;  // 100-MHz timetag (absolute tick)
  Signature signature;
  std::int64_t record_subbin = 0;       // alignment at which the centroid hit 4..6
  std::int64_t herald_emit_subbin = 0;  // real-time herald output
  std::int64_t last_pulse_subbin = 0;   // newest contributing pulse

  friend bool operator==(const Event&, const Event&) = default;
};

/// Fixed latency from the recording alignment to the herald output, in sub-bins.
inline constexpr std::int64_t kPipelineDepth = 23;

/// Sliding nine-sub-bin coincidence window.
///
/// At every 300-MHz cycle T the window holds sub-bins T-8..T; index k = T - t
/// puts the newest sub-bin at k = 0. When the combined weighted average of
/// the window reaches 4, 5 or 6 an event is recorded with the full signature
/// and its pulses are consumed, so each pulse feeds at most one event. The
/// event's coarse timetag is the 100-MHz bin of the centroid sub-bin T - bin.
/// Only cycles with a non-empty window are evaluated.
class CoincidencePipeline {
 public:
  /// Pulses must arrive in non-decreasing sub-bin order, after any advance_to() or flush().
  void push(const DetectorPulse& p) {
    if (p.side < 0 || p.side > 1) throw DomainError("pulse side must be 0 (A) or 1 (B)");
    if (p.subbin <= cycle_) throw DomainError("pulse arrived after its cycle was evaluated");
    advance_to(p.subbin - 1);
    pending_.push_back(p);
    ++pulses_in_;
  }

  void push(std::span<const DetectorPulse> pulses) {
    for (const auto& p : pulses) push(p);
  }

  /// Evaluates every cycle up to and including `t`; later pulses must be > t.
  void advance_to(std::int64_t t) {
    while (!pending_.empty() && cycle_ < t) {
      ++cycle_;
      evaluate();
    }
    if (pending_.empty() && cycle_ < t) cycle_ = t;
  }

  /// Runs the window until every pending pulse is recorded or shifted out.
  void flush() { advance_to(std::numeric_limits<std::int64_t>::max() - 1); }

  /// Moves out the events recorded so far.
  std::vector<Event> take() {
    std::vector<Event> out;
    out.swap(events_);
    return out;
  }

  std::uint64_t pulses_in() const { return pulses_in_; }
  std::uint64_t pulses_expired() const { return pulses_expired_; }

 private:
  void evaluate() {
    const std::int64_t t = cycle_;
    while (!pending_.empty() && pending_.front().subbin < t - (kSubBins - 1)) {
      pending_.pop_front();
      ++pulses_expired_;
    }
    if (pending_.empty()) return;
    SideCounts a{}, b{};
    std::int64_t newest = pending_.front().subbin;
    std::size_t in_window = 0;
    for (const auto& p : pending_) {
      if (p.subbin > t) break;
      const auto k = static_cast<std::size_t>(t - p.subbin);
      (p.side == 0 ? a : b)[k] += 1;
      newest = p.subbin;
      ++in_window;
    }
    const auto bin = weighted_average_subbin(a, b);
    if (!bin || !centroid_records(*bin)) return;
    Event e;
    e.signature = Signature::from_counts(a, b);
    e.record_subbin = t;
    e.herald_emit_subbin = t + kPipelineDepth;
    e.last_pulse_subbin = newest;
    e.coarse = floor_div(t - *bin, kSubBinsPerCoarse);
    events_.push_back(e);
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(in_window));
  }

  static std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

  std::deque<DetectorPulse> pending_;
  std::int64_t cycle_ = std::numeric_limits<std::int64_t>::min() / 2;
  std::vector<Event> events_;
  std::uint64_t pulses_in_ = 0;
  std::uint64_t pulses_expired_ = 0;
};

/// Whole-stream convenience wrapper.
inline std::vector<Event> coincidence_pipeline(std::span<const DetectorPulse> pulses) {
  CoincidencePipeline p;
  p.push(pulses);
  p.flush();
  return p.take();
}

}  // namespace psgen::pso
