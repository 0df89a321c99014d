// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace swiftbot {

/// Single-threaded deterministic event loop: a min-heap keyed by
/// (time, insertion sequence). Equal-time events run in schedule order.
class EventQueue {
 public:
  using Handler = std::function<void()>;

  void schedule(double time, Handler fn) {
    if (time < now_) time = now_;  // same-instant follow-up work
    heap_.push(Item{time, seq_++, std::move(fn)});
  }

  double now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  size_t pending() const { return heap_.size(); }

  bool run_next() {
    if (heap_.empty()) return false;
    Item item = heap_.top();
    heap_.pop();
    now_ = item.time;
    item.fn();
    return true;
  }

  /// Runs every event with time <= horizon; clock lands on the horizon.
  void run_until(double horizon) {
    while (!heap_.empty() && heap_.top().time <= horizon) run_next();
    if (now_ < horizon) now_ = horizon;
  }

  void drain() {
    while (run_next()) {
    }
  }

 private:
  struct Item {
    double time;
    uint64_t seq;
    Handler fn;
    bool operator>(const Item& o) const {
      if (time != o.time) return time > o.time;
      return seq > o.seq;
    }
  };
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap_;
  uint64_t seq_ = 0;
  double now_ = 0.0;
};

}  // namespace swiftbot
