// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "swiftbot/common/rng.hpp"
#include "swiftbot/decomposer/decomposer.hpp"
#include "swiftbot/network.hpp"
#include "swiftbot/overlay/chord.hpp"
#include "swiftbot/pool/warm_pool.hpp"
#include "swiftbot/scheduler/scheduler.hpp"
#include "swiftbot/selector/selector.hpp"
#include "swiftbot/sim/event_queue.hpp"
#include "swiftbot/sim/metrics.hpp"
#include "swiftbot/sim/sim_config.hpp"
#include "swiftbot/sim/trace.hpp"

namespace swiftbot {

/// Deterministic discrete-event run of the full pipeline
/// (decompose -> schedule -> select -> execute -> feedback) under one
/// container policy. The engine keeps all per-node state behind the single
/// event loop; the policy only changes which selection phases run and
/// whether pools pre-warm and keep containers alive.
class ClusterSim : public PoolDirectory {
 public:
  struct Totals {
    int injected = 0;
    int completed = 0;
    int failed = 0;
    int pending = 0;
    int local_hits = 0;
    int migrations = 0;
    int cold_starts = 0;
    int put_conflicts = 0;
  };

  ClusterSim(const SimConfig& cfg, Policy policy, MetricsCollector& metrics);
  ~ClusterSim() override;

  Totals run();

  const WarmPool* pool_at(const NodeId& node) const override;

  const ChordOverlay& overlay() const { return overlay_; }
  /// Lifecycle events from every pool this run ever created (for invariant
  /// scans over complete event logs).
  std::vector<PoolEvent> all_pool_events() const;

 private:
  struct SimNode {
    NodeId id;
    NodeProfile profile;
    std::unique_ptr<WarmPool> pool;
    double cpu_used = 0.0;
    double mem_used = 0.0;
    int transfers = 0;  // in-flight pulls + migrations touching this node
    uint64_t cold_seq = 0;
    bool responding = true;
    double crash_time = 0.0;
  };

  enum class SubState { kBlocked, kReady, kAllocating, kRunning, kDone };

  struct SubRun {
    size_t dag_index = 0;
    SubState state = SubState::kBlocked;
    double ready_time = 0.0;
    int attempt = 0;
    size_t node_idx = SIZE_MAX;
    std::string container_id;
    int completions = 0;
    double exec_started = 0.0;
  };

  struct TaskRun {
    TaskSpec spec;
    SubtaskDag dag;
    uint32_t key = 0;
    double arrival = 0.0;
    uint64_t seq = 0;
    std::map<std::string, SubRun> subs;
    std::set<std::string> completed;
    std::map<std::string, double> stage_durations;
    NodeId coordinator;
    bool done = false;
    bool failed = false;
    bool awaiting_recovery = false;
    double failure_time = 0.0;
    double dispatch_hold_until = 0.0;
  };

  // setup
  void build_cluster();
  void place_volumes();
  void schedule_arrivals();
  void schedule_failures();

  // pipeline
  void on_arrival(size_t arrival_idx);
  void schedule_dispatch(double at_time = -1.0);
  void dispatch_pass();
  void begin_allocation(TaskRun& task, const std::string& sub_id, size_t node_idx);
  void on_alloc_complete(const std::string& task_id, const std::string& sub_id,
                         int attempt, size_t src_idx, double queue_wait,
                         const AllocationDecision& decision, double realized_latency);
  void on_exec_complete(const std::string& task_id, const std::string& sub_id,
                        int attempt);
  void requeue_subtask(TaskRun& task, const std::string& sub_id);

  // periodic machinery
  void maintenance_tick();
  void stabilize_tick();
  bool workload_finished() const;

  // churn
  void fail_node(size_t idx, double rejoin_after_s);
  void handle_detected_failure(const NodeId& addr);
  void process_rejoins();

  // migration (figure-2 path)
  void attempt_task_migration(TaskRun& task, MigrationReason reason);

  // helpers
  const Subtask& subtask_of(const TaskRun& task, const std::string& sub_id) const;
  Checkpoint checkpoint_of(const TaskRun& task) const;
  std::vector<NodeId> group_members(const NodeId& root) const;
  double jitter();
  double transfer_stretch(size_t src_idx, size_t dst_idx) const;
  double handoff_stretch(size_t node_idx) const;
  int effective_free_slots(const SimNode& node) const;
  PhaseMask phase_mask() const;
  void emit_startup_sample(double value, const NodeId& node);
  void refresh_registry(const NodeId& addr);
  size_t node_index(const NodeId& addr) const;
  void snapshot_pools();
  void collect_pool_events(WarmPool& pool);

  SimConfig cfg_;
  Policy policy_;
  MetricsCollector& metrics_;
  StaticLinkModel links_;
  ChordOverlay overlay_;
  Decomposer decomposer_;
  OverloadDetector overload_;
  EventQueue queue_;
  Rng arrival_rng_;
  Rng jitter_rng_;

  std::vector<SimNode> nodes_;
  std::map<NodeId, size_t> node_index_;
  std::map<std::string, std::pair<double, double>> image_sizing_;  // cpu, mem
  std::map<std::string, std::set<std::string>> image_volumes_;
  std::set<std::string> stateful_images_;
  std::map<std::string, NodeId> volume_hosts_;

  std::map<std::string, TaskRun> tasks_;
  std::vector<TraceTask> pending_arrivals_;
  size_t arrivals_scheduled_ = 0;

  std::vector<DynamicGroup> groups_;
  std::vector<std::pair<double, NodeId>> pending_rejoins_;
  std::set<std::string> deferred_migrations_;
  std::vector<PoolEvent> pool_events_;  // from retired pool instances

  bool dispatch_pending_ = false;
  bool halted_ = false;
  Totals totals_;
  std::optional<double> rate_label_;
};

}  // namespace swiftbot
