// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace swiftbot {

/// splitmix64 step; used to derive independent sub-seeds from a master seed.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

/// Deterministic RNG with hand-rolled distributions.
///
/// std::*_distribution output is implementation-defined, so sampling goes
/// through explicit formulas on top of mt19937_64 (which is fully specified
/// by the standard). Same seed, same sequence, everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) {
    double u = uniform01();
    return -std::log1p(-u) / rate;
  }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Lognormal with the given median; sigma is the log-space deviation.
  /// sigma == 0 degenerates to the median exactly.
  double lognormal(double median, double sigma) {
    if (sigma <= 0.0) return median;
    return median * std::exp(sigma * normal());
  }

  /// Multiplicative jitter with median 1.
  double jitter(double sigma) { return lognormal(1.0, sigma); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// FNV-1a over a string; for seed derivation only (ring ids use the
/// cryptographic digest in common/digest.hpp).
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace swiftbot
