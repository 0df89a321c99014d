// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "swiftbot/decomposer/task.hpp"
#include "swiftbot/network.hpp"
#include "swiftbot/overlay/chord.hpp"

namespace swiftbot {

class SchedulingError : public std::runtime_error {
 public:
  explicit SchedulingError(const std::string& what) : std::runtime_error(what) {}
};

/// Temporary node set rooted at its Coordinator, reformed every
/// stabilization round from a node and its r-1 successors.
struct DynamicGroup {
  uint32_t group_id = 0;  // root ring position
  NodeId root;
  std::vector<NodeId> members;
  double load = 0.0;                       // mean member load, [0,1]
  std::map<std::string, int> warm_index;   // summed per-image ready counts
};

enum class MigrationReason { kOverload, kFailure, kRebalance };

const char* to_string(MigrationReason r);

struct MigrationRequest {
  MigrationReason reason = MigrationReason::kOverload;
  NodeId current_node;
  std::string operation = "relocate";
  int num_containers = 1;
  uint32_t task_key = 0;
  std::string task_id;
  std::string image;                     // resource requirement for warm_fit
  std::set<std::string> required_volumes;
};

/// Dependency-closed record of finished work; migration resumes execution at
/// the first non-completed frontier.
struct Checkpoint {
  uint32_t task_key = 0;
  std::set<std::string> completed_subtasks;
  double partial_results_mib = 0.0;
  double taken_at = 0.0;
};

/// True when every completed node's predecessors are also completed and all
/// ids exist in the DAG.
bool checkpoint_closed(const Checkpoint& cp, const SubtaskDag& dag);

struct SchedulerWeights {
  // Coarse group score G = a*(1-load) + b*locality + c*warm_match.
  double group_load = 0.4;
  double group_locality = 0.3;
  double group_warm = 0.3;
  // Target score C = warm_fit + (1-load) + proximity + history.
  double target_warm_fit = 0.4;
  double target_load = 0.3;
  double target_proximity = 0.2;
  double target_history = 0.1;
  double overload_cpu = 0.85;
  int overload_ticks = 2;
};

/// One group per live node: the node plus its r-1 successors.
std::vector<DynamicGroup> form_groups(const ChordOverlay& overlay, int r);

/// Coarse level: argmax of G over the candidate groups; ties take the lower
/// group_id. Throws SchedulingError when no group is live.
const DynamicGroup& select_group(const Subtask& subtask,
                                 const std::vector<DynamicGroup>& groups,
                                 const SchedulerWeights& w,
                                 const std::map<std::string, NodeId>& volume_hosts);

// Fine level -------------------------------------------------------------------

struct ReadySubtask {
  const Subtask* subtask = nullptr;
  std::optional<double> deadline_s;  // none dispatches last
  uint64_t seq = 0;                  // FIFO tie-break within a deadline class
};

struct MemberState {
  NodeId node;
  double total_cpu = 0.0;
  double total_mem_mib = 0.0;
  double free_cpu = 0.0;
  double free_mem_mib = 0.0;
  int free_slots = 0;
};

struct DispatchItem {
  std::string subtask_id;
  NodeId node;
};

struct ScheduleResult {
  std::vector<DispatchItem> dispatched;
  std::vector<std::string> infeasible;  // larger than any member's total capacity
};

/// Earliest-deadline-first dispatch over the group's members. Never exceeds
/// a member's free cpu/mem/slots (member state is debited as items pack);
/// subtasks that fit nowhere right now stay queued, subtasks larger than
/// every member's total capacity are reported infeasible.
ScheduleResult coordinator_schedule(
    std::vector<ReadySubtask> ready, std::vector<MemberState>& members,
    const std::function<int(const NodeId&, const std::string&)>& warm_count);

// Migration protocol (request -> fetch-by-key -> find-target -> commit) --------

struct TargetChoice {
  enum Status { kTarget, kDeferred } status = kDeferred;
  NodeId target;
  double score = 0.0;
};

/// Steps 2-3: resolve the k successors of the task key and pick the best
/// target by warm fit, load, proximity to required volumes, and execution
/// history (registry view). Defers when no candidate has both a warm
/// container and spare capacity.
TargetChoice request_migration(
    const MigrationRequest& req, const ChordOverlay& overlay, int k,
    const SchedulerWeights& w, const std::map<std::string, NodeId>& volume_hosts,
    const LinkModel& links, const std::function<bool(const NodeId&)>& has_capacity);

struct CommitResult {
  enum Status { kCommitted, kAborted } status = kAborted;
  VersionedTaskEntry entry;   // committed state under the key either way
  double transfer_s = 0.0;    // checkpoint transfer latency when committed
};

/// Step 4: optimistic commit. Bumps the requester's version-vector slot,
/// writes assigned_node/status through put_entry, and prices the checkpoint
/// transfer. A lost conflict aborts the migration; the caller observes the
/// winning entry.
CommitResult commit_migration(const MigrationRequest& req, const NodeId& target,
                              const Checkpoint& checkpoint, const SubtaskDag* dag,
                              ChordOverlay& overlay, const LinkModel& links,
                              double serialize_overhead_s);

/// Per-node overload hysteresis: fires after `overload_ticks` consecutive
/// ticks above the cpu threshold, or immediately when a queued subtask has
/// no feasible slot; at most one outstanding request per node.
class OverloadDetector {
 public:
  OverloadDetector(double cpu_threshold, int ticks)
      : threshold_(cpu_threshold), ticks_(ticks) {}

  bool on_tick(const NodeId& node, double cpu_util, bool queued_infeasible);
  void clear(const NodeId& node);
  bool outstanding(const NodeId& node) const;

 private:
  struct Track {
    int consecutive_high = 0;
    bool outstanding = false;
  };
  double threshold_;
  int ticks_;
  std::map<NodeId, Track> tracks_;
};

}  // namespace swiftbot
