// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <istream>
#include <ostream>
#include <vector>

#include "swiftbot/decomposer/task.hpp"

namespace swiftbot {

struct TraceTask {
  double arrival_s = 0.0;
  TaskSpec spec;
};

/// Workload trace: one task per line,
///   arrival_time_s task_id task_class [key=value ...]
/// '#' starts a comment. Parse failures name the line.
std::vector<TraceTask> parse_trace(std::istream& in);
void write_trace(std::ostream& out, const std::vector<TraceTask>& tasks);

/// Synthetic open-loop workload: `count` tasks of one class with
/// exponential inter-arrivals at `rate` tasks/s.
std::vector<TraceTask> synth_trace(int count, TaskClass cls, double rate,
                                   uint64_t seed);

}  // namespace swiftbot
