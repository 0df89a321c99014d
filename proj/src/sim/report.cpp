// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/sim/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "swiftbot/common/errors.hpp"

namespace swiftbot {

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("percentile of an empty sample");
  if (p <= 0.0 || p > 100.0) throw ConfigError("percentile p must be in (0, 100]");
  std::sort(values.begin(), values.end());
  size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * values.size()));
  if (rank < 1) rank = 1;
  return values[rank - 1];
}

std::vector<CdfPoint> cdf_millisecond_grid(const std::vector<double>& seconds) {
  std::vector<CdfPoint> out;
  if (seconds.empty()) return out;
  std::vector<double> sorted = seconds;
  std::sort(sorted.begin(), sorted.end());
  const double max = sorted.back();
  const size_t n = sorted.size();
  size_t idx = 0;
  const long steps = static_cast<long>(std::ceil(max * 1000.0));
  out.reserve(steps + 1);
  for (long ms = 0; ms <= steps; ++ms) {
    double t = ms / 1000.0;
    while (idx < n && sorted[idx] <= t + 1e-12) ++idx;
    out.push_back({t, static_cast<double>(idx) / n});
  }
  return out;
}

namespace {

struct Key {
  std::string policy;
  double rate;
  bool operator<(const Key& o) const {
    if (policy != o.policy) return policy < o.policy;
    return rate < o.rate;
  }
};

}  // namespace

void write_summary(std::ostream& out, const MetricsCollector& metrics,
                   const SummaryOptions& opts) {
  auto included = [&](const MetricSample& s) {
    return !opts.warmup_filter || s.time_s >= opts.warmup_s;
  };

  // Startup-latency percentiles per (policy, arrival rate).
  std::map<Key, std::vector<double>> startup;
  for (const auto& s : metrics.samples()) {
    if (s.kind != MetricKind::kStartupLatency || !included(s)) continue;
    startup[{s.policy, s.arrival_rate.value_or(0.0)}].push_back(s.value);
  }
  out << "== startup latency (s) ==\n";
  out << "policy,rate,n,p50,p90,p99\n";
  for (const auto& [key, values] : startup) {
    out << key.policy << ',' << fmt_fixed(key.rate, 3) << ',' << values.size() << ','
        << fmt_fixed(percentile_nearest_rank(values, 50)) << ','
        << fmt_fixed(percentile_nearest_rank(values, 90)) << ','
        << fmt_fixed(percentile_nearest_rank(values, 99)) << '\n';
  }

  if (opts.include_cdf) {
    out << "== startup latency CDF (1 ms grid) ==\n";
    for (const auto& [key, values] : startup) {
      out << "policy=" << key.policy << " rate=" << fmt_fixed(key.rate, 3) << '\n';
      for (const auto& pt : cdf_millisecond_grid(values)) {
        out << fmt_fixed(pt.t_s, 3) << ' ' << fmt_fixed(pt.fraction, 4) << '\n';
      }
    }
  }

  // Round times: per-mode medians and IQR, then per-round medians.
  std::map<std::string, std::map<int, std::vector<double>>> rounds;
  for (const auto& s : metrics.samples()) {
    if (s.kind != MetricKind::kRoundTime) continue;
    rounds[s.policy][s.round.value_or(0)].push_back(s.value);
  }
  if (!rounds.empty()) {
    out << "== round time (s) ==\n";
    out << "policy,n_rounds,median,q1,q3\n";
    for (const auto& [policy, per_round] : rounds) {
      std::vector<double> all;
      for (const auto& [r, vs] : per_round) {
        for (double v : vs) all.push_back(v);
      }
      out << policy << ',' << all.size() << ','
          << fmt_fixed(percentile_nearest_rank(all, 50)) << ','
          << fmt_fixed(percentile_nearest_rank(all, 25)) << ','
          << fmt_fixed(percentile_nearest_rank(all, 75)) << '\n';
    }
    out << "policy,round,median\n";
    for (const auto& [policy, per_round] : rounds) {
      for (const auto& [r, vs] : per_round) {
        out << policy << ',' << r << ',' << fmt_fixed(percentile_nearest_rank(vs, 50))
            << '\n';
      }
    }
  }

  // Recovery / reintegration samples.
  std::vector<double> recovery;
  for (const auto& s : metrics.samples()) {
    if (s.kind == MetricKind::kRecoveryTime) recovery.push_back(s.value);
  }
  if (!recovery.empty()) {
    out << "== recovery time (s) ==\n";
    out << "n,p50,max\n";
    out << recovery.size() << ',' << fmt_fixed(percentile_nearest_rank(recovery, 50))
        << ',' << fmt_fixed(*std::max_element(recovery.begin(), recovery.end()))
        << '\n';
  }
}

}  // namespace swiftbot
