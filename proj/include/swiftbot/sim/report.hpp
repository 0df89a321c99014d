// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <ostream>
#include <vector>

#include "swiftbot/sim/metrics.hpp"

namespace swiftbot {

/// Nearest-rank percentile: value at rank ceil(p/100 * n) of the sorted
/// sample (1-indexed). p in (0, 100].
double percentile_nearest_rank(std::vector<double> values, double p);

struct CdfPoint {
  double t_s = 0.0;      // 1 ms grid
  double fraction = 0.0;  // P(X <= t)
};

/// Empirical CDF sampled on a 1 ms grid from 0 to the sample maximum.
std::vector<CdfPoint> cdf_millisecond_grid(const std::vector<double>& seconds);

struct SummaryOptions {
  bool include_cdf = true;
  bool warmup_filter = true;  // drop samples with time_s < warmup_s
  double warmup_s = 0.0;
};

/// Percentile tables (P50/P90/P99 per policy and arrival rate), optional
/// startup-latency CDFs, per-round medians/IQR for round-time samples, and
/// recovery statistics. Deterministic ordering throughout.
void write_summary(std::ostream& out, const MetricsCollector& metrics,
                   const SummaryOptions& opts);

}  // namespace swiftbot
