// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace swiftbot {

enum class MetricKind {
  kStartupLatency,
  kRoundTime,
  kRecoveryTime,
  kMigrationCount,
  kPoolHit,
};

const char* to_string(MetricKind k);

struct MetricSample {
  MetricKind kind = MetricKind::kStartupLatency;
  double value = 0.0;
  std::string policy;  // swiftbot | local_warm | cold_start | fedavg_baseline
  std::optional<double> arrival_rate;
  std::optional<int> round;
  std::string node;
  double time_s = 0.0;
};

/// One row per selection decision (model-side values; latency is realized).
struct SelectionAudit {
  double time_s = 0.0;
  std::string task;       // subtask id
  std::string phase;      // local_warm | migrated_warm | cold_start
  std::string container;
  double score = 0.0;
  double eta_s = 0.0;
  double cold_cost_s = 0.0;
  double latency_s = 0.0;
  std::string node;
  std::string policy;
};

/// One row per migration-protocol step.
struct MigrationAudit {
  double time_s = 0.0;
  std::string step;  // request | fetch | find | commit | abort | defer
  std::string task;
  std::string from;
  std::string to;
  std::string reason;
  std::string policy;
};

struct PoolSnapshotRow {
  double time_s = 0.0;
  std::string node;
  std::string image;
  std::string status;
  double state_mib = 0.0;
  int access_count = 0;
  double last_access = 0.0;
};

/// Fixed-precision float for byte-stable CSV output.
std::string fmt_fixed(double v, int digits = 6);

/// Append-only store for everything a run emits. Writers produce
/// deterministic, header-first CSV.
class MetricsCollector {
 public:
  void add(MetricSample sample) { samples_.push_back(std::move(sample)); }
  void add(SelectionAudit audit) { audits_.push_back(std::move(audit)); }
  void add(MigrationAudit audit) { migrations_.push_back(std::move(audit)); }
  void add(PoolSnapshotRow row) { pool_rows_.push_back(std::move(row)); }

  const std::vector<MetricSample>& samples() const { return samples_; }
  const std::vector<SelectionAudit>& audits() const { return audits_; }
  const std::vector<MigrationAudit>& migrations() const { return migrations_; }
  const std::vector<PoolSnapshotRow>& pool_rows() const { return pool_rows_; }

  void write_metrics_csv(std::ostream& out) const;
  void write_audit_csv(std::ostream& out) const;
  void write_migrations_csv(std::ostream& out) const;
  void write_pool_csv(std::ostream& out) const;

 private:
  std::vector<MetricSample> samples_;
  std::vector<SelectionAudit> audits_;
  std::vector<MigrationAudit> migrations_;
  std::vector<PoolSnapshotRow> pool_rows_;
};

}  // namespace swiftbot
