#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/common/random.hpp"

namespace psgen::hds {

inline constexpr std::uint32_t kOverflowBits = 29;
inline constexpr std::uint32_t kOverflowMask = (1u << kOverflowBits) - 1;

struct Geometry {
  std::uint32_t pages = 67500;
  std::uint32_t page_words = 1024;

  std::uint32_t capacity() const { return pages * page_words; }
  std::uint32_t half() const { return capacity() / 2; }

  void validate() const {
    if (pages < 2 || page_words < 8 || page_words % 8 != 0) throw DomainError("ring geometry: pages >= 2, page_words a multiple of 8");
    if (capacity() % 16 != 0) throw DomainError("ring geometry: capacity must split into halves of whole 8-word bursts");
  }
};

/// Sample memory addressed through a page map, one word per timetag.
///
/// The page map models the non-contiguous page frames handed to the writer:
/// logical page i lives at physical page page_map[i]. The clock is a single
/// monotone tick count; cursor and overflow number are derived from it, so a
/// reader can detect a concurrent wrap by comparing tick snapshots.
class RingBuffer {
 public:
  explicit RingBuffer(Geometry g = {}, std::uint64_t page_seed = 0) : geom_(g) {
    geom_.validate();
    page_map_.resize(geom_.pages);
    std::iota(page_map_.begin(), page_map_.end(), 0u);
    if (page_seed != 0) {
      random::Engine rng(page_seed);
      for (std::size_t i = page_map_.size() - 1; i > 0; --i) std::swap(page_map_[i], page_map_[random::below(rng, i + 1)]);
    }
    memory_ = std::make_unique<std::atomic<std::uint32_t>[]>(geom_.capacity());
  }

  const Geometry& geometry() const { return geom_; }
  std::uint32_t capacity() const { return geom_.capacity(); }
  const std::vector<std::uint32_t>& page_map() const { return page_map_; }

  std::uint64_t address(std::uint32_t timetag) const {
    return static_cast<std::uint64_t>(page_map_[timetag / geom_.page_words]) * geom_.page_words + timetag % geom_.page_words;
  }

  /// Total words ever written (acquire ordering: data below it is visible).
  std::uint64_t ticks() const { return ticks_.load(std::memory_order_acquire); }

  static std::uint32_t overflow_of(std::uint64_t ticks, std::uint32_t cap) {
    return static_cast<std::uint32_t>((ticks / cap) & kOverflowMask);
  }
  std::uint32_t overflow_number() const { return overflow_of(ticks(), capacity()); }
  std::uint32_t cursor() const { return static_cast<std::uint32_t>(ticks() % capacity()); }

  /// Writes consecutive words at the cursor, wrapping as needed (single writer).
  void write(std::span<const std::uint32_t> words) {
    const std::uint64_t start = ticks_.load(std::memory_order_relaxed);
    const std::uint32_t cap = capacity();
    const std::uint32_t pw = geom_.page_words;
    std::uint32_t tag = static_cast<std::uint32_t>(start % cap);
    std::size_t i = 0;
    while (i < words.size()) {
      // One page segment at a time.
      const std::uint32_t offset = tag % pw;
      const std::size_t n = std::min<std::size_t>(pw - offset, words.size() - i);
      std::atomic<std::uint32_t>* dst = &memory_[address(tag)];
      for (std::size_t k = 0; k < n; ++k) dst[k].store(words[i + k], std::memory_order_relaxed);
      i += n;
      tag += static_cast<std::uint32_t>(n);
      if (tag == cap) tag = 0;
    }
    ticks_.store(start + words.size(), std::memory_order_release);
  }

  /// Advances the clock without storing (samples lost upstream).
  void skip(std::uint64_t n) { ticks_.fetch_add(n, std::memory_order_acq_rel); }

  std::uint32_t read(std::uint32_t timetag) const { return memory_[address(timetag)].load(std::memory_order_relaxed); }

 private:
  Geometry geom_;
  std::vector<std::uint32_t> page_map_;
  std::unique_ptr<std::atomic<std::uint32_t>[]> memory_;
  std::atomic<std::uint64_t> ticks_{0};
};

}  // namespace psgen::hds
