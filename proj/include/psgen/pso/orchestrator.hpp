#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/common/random.hpp"
#include "psgen/hds/link.hpp"
#include "psgen/pso/console.hpp"
#include "psgen/pso/filters.hpp"
#include "psgen/pso/pipeline.hpp"
#include "psgen/pso/record.hpp"

namespace psgen::pso {

/// Per-run accounting. Heralded candidates satisfy
///   kept + mode_dropped + hold_dropped + seed_dropped + placeholder_excluded + stale_aborted = candidates
/// and zero-detection samples have their own ledger.
struct RunReport {
  std::uint64_t candidates = 0;
  std::uint64_t mode_dropped = 0;
  std::uint64_t hold_dropped = 0;
  std::uint64_t seed_dropped = 0;
  std::uint64_t placeholder_excluded = 0;
  std::uint64_t stale_aborted = 0;
  std::uint64_t kept = 0;

  std::uint64_t zero_attempts = 0;
  std::uint64_t zero_suppressed = 0;
  std::uint64_t zero_seed_dropped = 0;
  std::uint64_t zero_placeholder = 0;
  std::uint64_t zero_stale = 0;
  std::uint64_t zero_kept = 0;
  bool zero_rate_warning = false;

  std::uint64_t integrity_refusals = 0;
  std::map<SignatureClass, std::uint64_t> per_class;

  bool conserved() const {
    return kept + mode_dropped + hold_dropped + seed_dropped + placeholder_excluded + stale_aborted == candidates &&
           zero_kept + zero_seed_dropped + zero_placeholder + zero_stale + zero_suppressed == zero_attempts;
  }
};

inline void write_report(std::ostream& os, const RunReport& r) {
  os << "candidates " << r.candidates << '\n'
     << "mode_dropped " << r.mode_dropped << '\n'
     << "hold_dropped " << r.hold_dropped << '\n'
     << "seed_dropped " << r.seed_dropped << '\n'
     << "placeholder_excluded " << r.placeholder_excluded << '\n'
     << "stale_aborted " << r.stale_aborted << '\n'
     << "kept " << r.kept << '\n'
     << "zero_attempts " << r.zero_attempts << '\n'
     << "zero_suppressed " << r.zero_suppressed << '\n'
     << "zero_seed_dropped " << r.zero_seed_dropped << '\n'
     << "zero_placeholder " << r.zero_placeholder << '\n'
     << "zero_stale " << r.zero_stale << '\n'
     << "zero_kept " << r.zero_kept << '\n'
     << "zero_rate_warning " << (r.zero_rate_warning ? 1 : 0) << '\n'
     << "integrity_refusals " << r.integrity_refusals << '\n'
     << "conserved " << (r.conserved() ? 1 : 0) << '\n';
  for (const auto& [c, n] : r.per_class) os << class_name(c) << ' ' << n << '\n';
}

using RecordSink = std::function<void(const Record&)>;

/// Readable span of one server in absolute ticks: the sealed half.
struct SealedRegion {
  std::int64_t lo = 0;
  std::int64_t hi = 0;  // exclusive; lo == hi when nothing is sealed yet
  std::uint32_t flags = 0;
};

/// Absolute ticks are overflow * capacity + timetag. The 29-bit overflow
/// counter is not unwrapped; it lasts about eleven years at the full geometry.
inline SealedRegion sealed_region(const hds::Status& st, std::uint32_t capacity) {
  const std::int64_t cap = capacity;
  const std::int64_t half = cap / 2;
  const std::int64_t base = static_cast<std::int64_t>(st.overflow) * cap;
  SealedRegion r;
  r.flags = st.flags;
  if (static_cast<std::int64_t>(st.current_timetag) >= half) {
    r.lo = base;
    r.hi = base + half;
  } else if (st.overflow > 0) {
    r.lo = base - half;
    r.hi = base;
  }
  return r;
}

/// Filters heralded events, schedules delayed HDS queries for both modes and
/// hands finished records to a sink (usually a DatasetWriter).
///
/// Events are submitted in pipeline order. service() queries everything that
/// has become readable on both servers; entries that fell out of the sealed
/// half before they were served count as stale. Settings are re-read from the
/// shared console state on every submit.
class Orchestrator {
 public:
  Orchestrator(hds::Link& a, hds::Link& b, std::uint32_t capacity, SharedSettings& settings, RecordSink sink)
      : a_(a), b_(b), cap_(capacity), settings_(settings), sink_(std::move(sink)) {
    const RunSettings s = settings.snapshot();
    hold_ = HoldFilter(s.hold, s.keep_leader);
    keep_leader_ = s.keep_leader;
  }

  /// Start-of-run check: both servers healthy and on the same overflow number.
  void handshake() {
    const auto sa = a_.status();
    const auto sb = b_.status();
    if ((sa.flags | sb.flags) & hds::kRefusingFlags) throw AcquisitionError("HDS integrity flag set at run start");
    if (sa.overflow != sb.overflow) throw AcquisitionError("HDS overflow counters are not aligned");
  }

  void submit(std::span<const Event> events) {
    const RunSettings s = settings_.snapshot();
    if (s.hold != hold_.hold() || s.keep_leader != keep_leader_) {
      release(hold_.flush(), s);
      report_.hold_dropped += hold_.dropped();
      hold_ = HoldFilter(s.hold, s.keep_leader);
      keep_leader_ = s.keep_leader;
    }
    for (const auto& e : events) {
      ++report_.candidates;
      if (!recent_.empty() && e.coarse < recent_.back()) throw DomainError("events must arrive in coarse-time order");
      recent_.push_back(e.coarse);
      if (!mode_accepts(s.mode, e.signature)) {
        ++report_.mode_dropped;
        continue;
      }
      release(hold_.push(e), s);
    }
    if (!recent_.empty()) schedule_zero(s, recent_.back() - s.hold);
  }

  /// Releases held events and schedules zero-detection samples up to `horizon`
  /// (exclusive, coarse ticks). Call once no more events can arrive before it.
  void finish_events(std::int64_t horizon) {
    const RunSettings s = settings_.snapshot();
    release(hold_.flush(), s);
    schedule_zero(s, horizon);
  }

  /// Serves every pending entry whose words are readable on both servers.
  void service() {
    const SealedRegion ra = sealed_region(a_.status(), cap_);
    const SealedRegion rb = sealed_region(b_.status(), cap_);
    if ((ra.flags | rb.flags) & hds::kRefusingFlags) {
      ++report_.integrity_refusals;
      return;
    }
    serve(events_, ra, rb, false);
    serve(zeros_, ra, rb, true);
  }

  /// Counts everything still pending as stale; use after the final service().
  void abandon_pending() {
    report_.stale_aborted += events_.size();
    report_.zero_stale += zeros_.size();
    events_.clear();
    zeros_.clear();
  }

  std::size_t pending() const { return events_.size() + zeros_.size(); }

  RunReport report() const {
    RunReport r = report_;
    r.hold_dropped += hold_.dropped();
    return r;
  }

  /// Shutter-closed calibration: `n` random herald times inside the region
  /// readable on both servers, recorded with the all-zero signature.
  std::vector<Record> shot_noise(std::size_t n, random::Engine& rng) {
    const RunSettings s = settings_.snapshot();
    const SealedRegion ra = sealed_region(a_.status(), cap_);
    const SealedRegion rb = sealed_region(b_.status(), cap_);
    const std::int64_t lo = std::max(ra.lo - s.delay_a, rb.lo - s.delay_b);
    const std::int64_t hi = std::min(ra.hi - s.delay_a, rb.hi - s.delay_b);
    if (hi <= lo) throw AcquisitionError("no region readable on both servers for shot-noise calibration");
    std::vector<std::int64_t> times(n);
    for (auto& t : times) t = lo + static_cast<std::int64_t>(random::below(rng, static_cast<std::uint64_t>(hi - lo)));
    std::sort(times.begin(), times.end());
    std::vector<std::int64_t> ta, tb;
    for (auto t : times) {
      ta.push_back(t + s.delay_a);
      tb.push_back(t + s.delay_b);
    }
    std::vector<Record> out;
    const auto words_a = fetch(a_, ta, ra);
    const auto words_b = fetch(b_, tb, rb);
    if (!words_a || !words_b) throw AcquisitionError("shot-noise region went stale during the query");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (hds::is_placeholder((*words_a)[i]) || hds::is_placeholder((*words_b)[i])) continue;
      out.push_back(make_record(Pending{Signature{}, times[i], ta[i], tb[i]}, (*words_a)[i], (*words_b)[i]));
    }
    return out;
  }

 private:
  struct Pending {
    Signature signature;
    std::int64_t coarse = 0;
    std::int64_t tick_a = 0;
    std::int64_t tick_b = 0;
    std::uint32_t word_a = 0;
    std::uint32_t word_b = 0;
    bool have_a = false;
    bool have_b = false;
    bool stale = false;
  };

  void release(const std::optional<Event>& e, const RunSettings& s) {
    if (!e) return;
    if (s.seed.rejects(e->coarse)) {
      ++report_.seed_dropped;
      return;
    }
    events_.push_back(Pending{e->signature, e->coarse, e->coarse + s.delay_a, e->coarse + s.delay_b});
  }

  void schedule_zero(const RunSettings& s, std::int64_t until) {
    if (until <= zero_cursor_) return;
    const std::int64_t from = zero_cursor_;
    while (recent_.size() > 1 && recent_.front() < from - s.hold - 1) recent_.pop_front();
    if (s.zdr_rate > 0) {
      std::vector<std::int64_t> ev(recent_.begin(), recent_.end());
      const auto plan = zero_detection_sampler(s.zdr_rate, cap_, from, until, ev, s.hold);
      report_.zero_attempts += plan.attempts;
      report_.zero_suppressed += plan.suppressed;
      report_.zero_rate_warning =
          report_.zero_rate_warning || (report_.zero_attempts > 1000 && report_.zero_suppressed * 100 > report_.zero_attempts);
      for (auto t : plan.tags) {
        if (s.seed.rejects(t)) {
          ++report_.zero_seed_dropped;
          continue;
        }
        zeros_.push_back(Pending{Signature{}, t, t + s.delay_a, t + s.delay_b});
      }
    }
    zero_cursor_ = until;
  }

  /// Words at absolute `ticks` from one link, or nullopt when the server reported staleness.
  std::optional<std::vector<std::uint32_t>> fetch(hds::Link& link, const std::vector<std::int64_t>& ticks,
                                                  const SealedRegion& r) {
    std::vector<std::uint32_t> tags;
    tags.reserve(ticks.size());
    for (auto t : ticks) tags.push_back(static_cast<std::uint32_t>(t % cap_));
    const auto overflow = static_cast<std::uint32_t>((r.lo / cap_) & hds::kOverflowMask);
    const hds::Response resp = link.query(overflow, tags);
    if (resp.error == hds::ErrorCode::StaleOverflow) return std::nullopt;
    if (!resp.ok()) throw AcquisitionError(std::string("HDS query failed: ") + hds::to_string(resp.error));
    return resp.words;
  }

  Record make_record(const Pending& p, std::uint32_t wa, std::uint32_t wb) const {
    const auto ovf = static_cast<std::uint32_t>((p.coarse / cap_) & hds::kOverflowMask);
    const auto tag = static_cast<std::uint32_t>(p.coarse % cap_);
    return Record::from_words(p.signature, ovf, tag, wa, wb);
  }

  /// Marks entries of one side stale or fetches their words. Each side is
  /// served as soon as its own sample is sealed, since the two delays can put
  /// the pair in different halves.
  void serve_side(std::deque<Pending>& queue, const SealedRegion& r, bool side_a,
                  std::vector<std::size_t>& ready, std::vector<std::int64_t>& ticks) {
    ready.clear();
    ticks.clear();
    for (std::size_t i = 0; i < queue.size(); ++i) {
      Pending& p = queue[i];
      if (p.stale || (side_a ? p.have_a : p.have_b)) continue;
      const std::int64_t t = side_a ? p.tick_a : p.tick_b;
      if (t < r.lo) {
        p.stale = true;
      } else if (t < r.hi) {
        ready.push_back(i);
        ticks.push_back(t);
      }
    }
  }

  void serve(std::deque<Pending>& queue, const SealedRegion& ra, const SealedRegion& rb, bool zero) {
    auto& stale = zero ? report_.zero_stale : report_.stale_aborted;
    auto& placeholder = zero ? report_.zero_placeholder : report_.placeholder_excluded;
    auto& kept = zero ? report_.zero_kept : report_.kept;
    std::vector<std::size_t> ready_a, ready_b;
    std::vector<std::int64_t> ticks_a, ticks_b;
    serve_side(queue, ra, true, ready_a, ticks_a);
    serve_side(queue, rb, false, ready_b, ticks_b);
    // The two modes are independent servers; query them concurrently.
    std::future<std::optional<std::vector<std::uint32_t>>> fa;
    if (!ticks_a.empty()) fa = std::async(std::launch::async, [&] { return fetch(a_, ticks_a, ra); });
    const auto wb = ticks_b.empty() ? std::nullopt : fetch(b_, ticks_b, rb);
    const auto wa = ticks_a.empty() ? std::nullopt : fa.get();
    for (std::size_t k = 0; k < ready_a.size(); ++k) {
      Pending& p = queue[ready_a[k]];
      if (!wa) p.stale = true;
      else p.word_a = (*wa)[k], p.have_a = true;
    }
    for (std::size_t k = 0; k < ready_b.size(); ++k) {
      Pending& p = queue[ready_b[k]];
      if (!wb) p.stale = true;
      else p.word_b = (*wb)[k], p.have_b = true;
    }
    while (!queue.empty()) {
      const Pending& p = queue.front();
      if (p.stale) {
        ++stale;
      } else if (p.have_a && p.have_b) {
        if (hds::is_placeholder(p.word_a) || hds::is_placeholder(p.word_b)) {
          ++placeholder;
        } else {
          const Record rec = make_record(p, p.word_a, p.word_b);
          ++kept;
          ++report_.per_class[rec.signature.klass()];
          if (sink_) sink_(rec);
        }
      } else {
        break;
      }
      queue.pop_front();
    }
  }

  hds::Link& a_;
  hds::Link& b_;
  std::uint32_t cap_;
  SharedSettings& settings_;
  RecordSink sink_;
  HoldFilter hold_;
  bool keep_leader_ = false;
  std::deque<std::int64_t> recent_;  // candidate coarse times still relevant to zero-detection spacing
  std::int64_t zero_cursor_ = 0;
  std::deque<Pending> events_;
  std::deque<Pending> zeros_;
  RunReport report_;
};

}  // namespace psgen::pso
