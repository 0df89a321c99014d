// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "swiftbot/network.hpp"
#include "swiftbot/overlay/chord.hpp"
#include "swiftbot/scheduler/scheduler.hpp"
#include "swiftbot/sim/event_queue.hpp"
#include "swiftbot/sim/metrics.hpp"
#include "swiftbot/sim/sim_config.hpp"

namespace swiftbot {

enum class AggregationMode { kCentralSync, kDhtPooled };

const char* to_string(AggregationMode m);

/// Round-timing model for synchronous federated training.
///
/// central_sync waits for the slowest participant every round. dht_pooled
/// splits each client's round work into shards and lets idle peers pull
/// shards from stragglers through the migration protocol (request ->
/// fetch-by-key -> find-target -> commit with checkpoint transfer), so round
/// time approaches the balanced makespan instead of the straggler's time.
class FlSim {
 public:
  struct Result {
    std::vector<double> round_seconds;           // index = round-1
    std::vector<double> round_max_compute;       // straggler bound per round
    std::map<std::string, int> shard_completions;  // "round:owner:index" -> count
    std::vector<double> reintegration_s;
    int steals = 0;
    int steal_conflicts = 0;
  };

  FlSim(const SimConfig& cfg, const std::string& profile_name, int clients,
        AggregationMode mode, MetricsCollector& metrics);

  Result run(const std::vector<FailureEvent>& failure_schedule);

 private:
  struct Shard {
    int round = 0;
    int owner = 0;   // client whose data this shard trains
    int index = 0;
    double duration_s = 0.0;
    int runner = -1;  // client currently executing it, -1 = queued
    bool completed = false;
    int attempt = 0;
  };

  struct Client {
    NodeId id;
    bool responding = true;
    bool busy = false;
    int current_shard = -1;  // index into shards_
    double rejoin_at = -1.0;
    bool rejoin_requested = false;
    double rejoin_request_time = 0.0;
  };

  void start_round(int round);
  void begin_shard(int client_idx, int shard_idx);
  void on_shard_complete(int client_idx, int shard_idx, int attempt);
  void steal_scan();
  bool try_steal_for(int idle_idx);
  void finish_round_if_done();
  void maintenance_tick();
  void stabilize_tick();
  void fail_client(int idx);
  double compute_seconds(int round, int client) const;
  void set_idle_registry(int idx, bool idle);

  SimConfig cfg_;
  std::string profile_name_;
  FlProfile profile_;
  int n_clients_;
  AggregationMode mode_;
  MetricsCollector& metrics_;
  StaticLinkModel links_;
  ChordOverlay overlay_;
  EventQueue queue_;

  std::vector<Client> clients_;
  std::vector<Shard> shards_;          // current round only
  std::deque<int> unassigned_;         // shard indices not yet claimed
  int round_ = 0;
  double round_start_ = 0.0;
  int shards_remaining_ = 0;
  bool round_open_ = false;
  bool finished_ = false;
  std::map<int, std::vector<std::pair<int, double>>> failures_by_round_;
  Result result_;
};

}  // namespace swiftbot
