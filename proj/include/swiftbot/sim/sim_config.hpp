// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "swiftbot/calibration.hpp"
#include "swiftbot/overlay/chord.hpp"
#include "swiftbot/pool/warm_pool.hpp"
#include "swiftbot/scheduler/scheduler.hpp"
#include "swiftbot/selector/selector.hpp"

namespace swiftbot {

enum class Policy { kSwiftbot, kLocalWarm, kColdStart };

const char* to_string(Policy p);
std::optional<Policy> parse_policy(const std::string& s);

struct NodeProfile {
  double cores = 8.0;
  double mem_mib = 8192.0;
  double speed = 1.0;  // relative execution speed
};

struct ArrivalConfig {
  enum class Type { kPoisson, kTrace } type = Type::kPoisson;
  double rate_tasks_per_s = 4.0;
  std::string trace_path;  // resolved against the config directory
  std::vector<TaskClass> classes = {TaskClass::kMediaVideo, TaskClass::kMediaAudio};
};

/// Stochastic texture of the latency model. latency_sigma is multiplicative
/// lognormal jitter (median 1) on every primitive latency; contention
/// stretches transfers by concurrent transfer count, handoff_load_factor
/// stretches handoffs by node cpu pressure. All zeroable for exact-model
/// tests.
struct NoiseConfig {
  double latency_sigma = 0.10;
  double transfer_contention = 0.04;
  int contention_cap = 8;  // interference saturates past this many transfers
  double handoff_load_factor = 0.3;
};

struct FlProfile {
  double median_s = 180.0;  // per-client round compute, lognormal median
  double sigma = 0.6;
};

struct FlConfig {
  int clients = 16;
  int rounds = 20;
  int shards_per_client = 20;
  double model_mib = 50.0;
  double shard_mib = 20.0;
  double aggregation_s = 1.0;
  double upload_bandwidth_mibps = 100.0;
  double failure_offset_frac = 0.3;  // failures strike this far into the round
  double rejoin_after_s = 45.0;
  std::map<std::string, FlProfile> profiles;  // ucf101, librispeech
};

struct FailureEvent {
  // Cluster form: fail nodes at a simulated time.
  std::optional<double> time_s;
  std::vector<int> nodes;
  // Federated form: fail clients at a round boundary.
  std::optional<int> round;
  std::vector<int> clients;
  double rejoin_after_s = 0.0;  // 0 = stays down
};

struct SimConfig {
  uint64_t seed = 42;
  double duration_s = 250.0;
  double warmup_s = 20.0;
  double drain_limit_s = 60.0;
  double maintenance_interval_s = 0.1;
  bool pool_snapshots = false;

  std::vector<NodeProfile> nodes;
  double default_bandwidth_mibps = 90.0;
  double default_latency_s = 0.002;
  std::vector<std::tuple<std::string, std::string, double>> bandwidth_overrides;
  std::vector<std::tuple<std::string, std::string, double>> latency_overrides;

  ArrivalConfig arrival;
  PoolConfig pool;
  double capacity_per_gib = 2.0;  // 0 disables memory-proportional capacity
  SelectorConfig selector;
  SchedulerWeights scheduler;
  OverlayConfig overlay;
  NoiseConfig noise;
  FlConfig fl;
  std::vector<FailureEvent> failure_schedule;

  Calibration calibration;

  /// Pool capacity for one node; proportional to memory when configured.
  int node_capacity(const NodeProfile& profile) const;

  static SimConfig defaults();
  static SimConfig from_json_text(const std::string& text, const std::string& base_dir);
  static SimConfig load_file(const std::string& path);
};

}  // namespace swiftbot
