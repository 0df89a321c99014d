// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <istream>
#include <ostream>

#include "swiftbot/decomposer/task.hpp"

namespace swiftbot {

/// DAG exchange format: one JSON object per line, one line per subtask,
/// fields (subtask_id, image, cpu, mem_mib, volumes, deps, parallel_group,
/// est_duration_s). Stable field order; volumes and deps sorted. External
/// decomposer backends speak exactly this.
void write_dag(std::ostream& out, const SubtaskDag& dag);

/// Parses the exchange format; throws ConfigError naming the offending line.
SubtaskDag parse_dag(std::istream& in);

}  // namespace swiftbot
