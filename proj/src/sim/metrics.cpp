// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/sim/metrics.hpp"

#include <cstdio>

namespace swiftbot {

const char* to_string(MetricKind k) {
  switch (k) {
    case MetricKind::kStartupLatency: return "startup_latency";
    case MetricKind::kRoundTime: return "round_time";
    case MetricKind::kRecoveryTime: return "recovery_time";
    case MetricKind::kMigrationCount: return "migration_count";
    case MetricKind::kPoolHit: return "pool_hit";
  }
  return "?";
}

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void MetricsCollector::write_metrics_csv(std::ostream& out) const {
  out << "kind,value,policy,arrival_rate,round,node,time_s\n";
  for (const auto& s : samples_) {
    out << to_string(s.kind) << ',' << fmt_fixed(s.value) << ',' << s.policy << ',';
    if (s.arrival_rate) out << fmt_fixed(*s.arrival_rate, 3);
    out << ',';
    if (s.round) out << *s.round;
    out << ',' << s.node << ',' << fmt_fixed(s.time_s) << '\n';
  }
}

void MetricsCollector::write_audit_csv(std::ostream& out) const {
  out << "time_s,task,phase,container,score,eta_s,cold_cost_s,latency_s,node,policy\n";
  for (const auto& a : audits_) {
    out << fmt_fixed(a.time_s) << ',' << a.task << ',' << a.phase << ','
        << a.container << ',' << fmt_fixed(a.score) << ',' << fmt_fixed(a.eta_s)
        << ',' << fmt_fixed(a.cold_cost_s) << ',' << fmt_fixed(a.latency_s) << ','
        << a.node << ',' << a.policy << '\n';
  }
}

void MetricsCollector::write_migrations_csv(std::ostream& out) const {
  out << "time_s,step,task,from,to,reason,policy\n";
  for (const auto& m : migrations_) {
    out << fmt_fixed(m.time_s) << ',' << m.step << ',' << m.task << ',' << m.from
        << ',' << m.to << ',' << m.reason << ',' << m.policy << '\n';
  }
}

void MetricsCollector::write_pool_csv(std::ostream& out) const {
  out << "time_s,node,image,status,state_mib,access_count,last_access\n";
  for (const auto& r : pool_rows_) {
    out << fmt_fixed(r.time_s) << ',' << r.node << ',' << r.image << ',' << r.status
        << ',' << fmt_fixed(r.state_mib, 3) << ',' << r.access_count << ','
        << fmt_fixed(r.last_access) << '\n';
  }
}

}  // namespace swiftbot
