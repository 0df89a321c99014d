// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace swiftbot {

enum class VectorOrder { kEqual, kDominates, kDominated, kConcurrent };

/// Per-node update counters for a replicated entry. Missing nodes count as 0.
class VersionVector {
 public:
  VersionVector() = default;

  uint64_t get(const std::string& node) const {
    auto it = counters_.find(node);
    return it == counters_.end() ? 0 : it->second;
  }

  void bump(const std::string& node) { ++counters_[node]; }

  void set(const std::string& node, uint64_t value) {
    if (value > 0) counters_[node] = value;
  }

  /// Ordering of *this relative to other.
  VectorOrder compare(const VersionVector& other) const {
    bool greater = false, less = false;
    auto visit = [&](const std::string& node) {
      uint64_t a = get(node), b = other.get(node);
      if (a > b) greater = true;
      if (a < b) less = true;
    };
    for (const auto& [node, _] : counters_) visit(node);
    for (const auto& [node, _] : other.counters_) {
      if (!counters_.count(node)) visit(node);
    }
    if (greater && less) return VectorOrder::kConcurrent;
    if (greater) return VectorOrder::kDominates;
    if (less) return VectorOrder::kDominated;
    return VectorOrder::kEqual;
  }

  /// Element-wise max.
  void merge(const VersionVector& other) {
    for (const auto& [node, count] : other.counters_) {
      auto& mine = counters_[node];
      if (count > mine) mine = count;
    }
  }

  /// True if no component of `next` is below the corresponding one here.
  bool monotone_under(const VersionVector& next) const {
    for (const auto& [node, count] : counters_) {
      if (next.get(node) < count) return false;
    }
    return true;
  }

  const std::map<std::string, uint64_t>& counters() const { return counters_; }

  bool operator==(const VersionVector& other) const {
    return compare(other) == VectorOrder::kEqual;
  }

 private:
  std::map<std::string, uint64_t> counters_;
};

}  // namespace swiftbot
