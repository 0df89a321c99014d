// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <cstdint>

namespace swiftbot {

/// Identifier-space arithmetic for a ring of width `bits` (<= 32).
/// Positions are plain uint32_t values already reduced mod 2^bits;
/// RingSpace supplies the wrap-aware interval tests Chord routing needs.
class RingSpace {
 public:
  explicit RingSpace(unsigned bits = 32) : bits_(bits) {
    mask_ = (bits >= 32) ? 0xffffffffu : ((1u << bits) - 1u);
  }

  unsigned bits() const { return bits_; }
  uint32_t mask() const { return mask_; }

  uint32_t reduce(uint64_t v) const { return static_cast<uint32_t>(v & mask_); }

  uint32_t add(uint32_t a, uint64_t delta) const { return reduce(uint64_t{a} + delta); }

  /// Clockwise distance from a to b.
  uint32_t distance(uint32_t a, uint32_t b) const {
    return reduce(uint64_t{b} + mask_ + 1 - a);
  }

  /// x in (a, b] walking clockwise. a == b denotes the full ring.
  bool in_open_closed(uint32_t x, uint32_t a, uint32_t b) const {
    if (a == b) return true;
    if (a < b) return x > a && x <= b;
    return x > a || x <= b;  // wrapped interval
  }

  /// x in (a, b) walking clockwise. Empty when a == b... except that Chord
  /// treats (n, n) as the whole ring minus n; we follow that convention.
  bool in_open_open(uint32_t x, uint32_t a, uint32_t b) const {
    if (a == b) return x != a;
    if (a < b) return x > a && x < b;
    return x > a || x < b;
  }

 private:
  unsigned bits_;
  uint32_t mask_;
};

}  // namespace swiftbot
