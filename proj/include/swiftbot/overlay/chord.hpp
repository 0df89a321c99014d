// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "swiftbot/overlay/ring_math.hpp"
#include "swiftbot/overlay/version_vector.hpp"

namespace swiftbot {

using NodeId = std::string;

enum class TaskStatus { kPending, kInProgress, kMigrating, kDone, kFailed };

const char* to_string(TaskStatus s);

/// Replicated task-assignment record stored under a ring key.
struct VersionedTaskEntry {
  uint32_t task_key = 0;
  NodeId assigned_node;
  TaskStatus status = TaskStatus::kPending;
  int containers_allocated = 0;
  VersionVector version;
  double load_score = 0.0;
  double availability_score = 0.0;

  bool same_payload(const VersionedTaskEntry& o) const {
    return task_key == o.task_key && assigned_node == o.assigned_node &&
           status == o.status && containers_allocated == o.containers_allocated &&
           load_score == o.load_score && availability_score == o.availability_score;
  }
};

enum class PutStatus {
  kCommitted,     // incoming dominated the stored version (or slot was empty)
  kResolvedWin,   // concurrent; incoming payload won the deterministic resolution
  kResolvedLoss,  // concurrent; stored payload retained, vectors merged
  kStale,         // stored version dominates (or equals) the incoming one
  kUnreachable,   // no responding node could accept the write
};

struct PutResult {
  PutStatus status = PutStatus::kUnreachable;
  VersionedTaskEntry committed;  // state now stored under the key (when reachable)

  bool accepted() const {
    return status == PutStatus::kCommitted || status == PutStatus::kResolvedWin;
  }
};

/// Per-node resource registry gossiped on the stabilization cadence:
/// warm-container counts per image plus the scores conflict resolution
/// and group selection read.
struct NodeRegistry {
  std::map<std::string, int> warm_by_image;
  double load_score = 0.0;
  double availability_score = 1.0;
  int successes = 0;  // task execution history on this node
  int failures = 0;

  double history_score() const {
    int n = successes + failures;
    return n == 0 ? 1.0 : static_cast<double>(successes) / n;
  }
};

struct OverlayConfig {
  unsigned id_bits = 32;
  int successor_count = 5;           // r; replicas per entry
  double heartbeat_interval_s = 0.1;
  int heartbeat_timeout_beats = 3;
  double stabilize_interval_s = 0.5;
};

enum class JoinStatus { kJoined, kBootstrapUnreachable, kDuplicateId };

struct LookupResult {
  NodeId owner;
  int hops = 0;
};

/// Chord-style overlay over simulated nodes.
///
/// Every node keeps only local routing state (predecessor, successor list,
/// finger table); lookups walk that state node by node, so hop counts mean
/// what they would on a wire. The ring itself is stepped explicitly:
/// join/leave integrate membership immediately, entry re-replication after
/// failures is batched into stabilize() rounds.
class ChordOverlay {
 public:
  explicit ChordOverlay(OverlayConfig cfg = {});

  const OverlayConfig& config() const { return cfg_; }
  const RingSpace& space() const { return space_; }

  // -- membership ----------------------------------------------------------

  JoinStatus join(const NodeId& address, const std::optional<NodeId>& bootstrap,
                  double now);
  /// Join with a pinned ring position (tests with small identifier spaces).
  JoinStatus join_at(uint32_t position, const NodeId& address,
                     const std::optional<NodeId>& bootstrap, double now);
  /// Graceful departure: entries hand off immediately.
  void leave(const NodeId& address, double now);
  /// Crash: the node stops responding; detection happens via heartbeats.
  void crash(const NodeId& address);

  void record_heartbeat(const NodeId& address, double now);
  /// Marks nodes silent past the timeout as dead; each is reported once.
  std::vector<NodeId> detect_failures(double now);

  /// Recomputes successor lists, predecessors and finger tables from the
  /// detected-live membership, then re-places every entry on its owner and
  /// r-1 successors.
  void stabilize(double now);

  // -- routing -------------------------------------------------------------

  uint32_t position_of(const NodeId& address) const;
  std::optional<NodeId> address_at(uint32_t position) const;
  bool is_alive(const NodeId& address) const;
  bool is_responding(const NodeId& address) const;
  size_t live_count() const;
  std::vector<NodeId> live_nodes() const;  // clockwise from position 0

  /// Stabilized-truth owner (no routing).
  std::optional<NodeId> owner_of(uint32_t key) const;

  /// Chord lookup starting from an arbitrary live node; counts the edges
  /// traversed to reach the owner.
  std::optional<LookupResult> lookup(uint32_t key) const;
  std::optional<LookupResult> lookup_from(const NodeId& start, uint32_t key) const;

  /// First min(k, live) distinct live nodes clockwise from key, owner first.
  std::vector<NodeId> successors_of_key(uint32_t key, int k) const;

  const std::vector<uint32_t>& successor_list(const NodeId& address) const;
  const std::vector<uint32_t>& finger_table(const NodeId& address) const;

  // -- replicated entries ----------------------------------------------------

  PutResult put_entry(const VersionedTaskEntry& entry);
  std::optional<VersionedTaskEntry> get_entry(uint32_t key) const;

  /// Keys stored on one node (replica or owner); sorted.
  std::vector<uint32_t> stored_keys(const NodeId& address) const;
  /// Nodes currently holding a replica of the key; clockwise order.
  std::vector<NodeId> replica_nodes(uint32_t key) const;

  // -- resource registry -----------------------------------------------------

  NodeRegistry& registry(const NodeId& address);
  const NodeRegistry& registry(const NodeId& address) const;

  /// One JSON object per node, clockwise: id, position, successors, alive.
  void export_ring(std::ostream& out) const;

  /// Deterministic conflict resolution: picks the surviving payload of two
  /// concurrent writes. Exposed for the migration path and for tests.
  static const VersionedTaskEntry& resolve_concurrent(const VersionedTaskEntry& a,
                                                      const VersionedTaskEntry& b);

 private:
  struct NodeState {
    uint32_t position = 0;
    NodeId address;
    bool alive = true;       // detected-live view used for routing
    bool responding = true;  // ground truth; false after crash()
    double last_heartbeat = 0.0;
    uint32_t predecessor = 0;
    std::vector<uint32_t> successors;
    std::vector<uint32_t> fingers;
    std::map<uint32_t, VersionedTaskEntry> store;
    NodeRegistry registry;
  };

  NodeState* find(const NodeId& address);
  const NodeState* find(const NodeId& address) const;
  std::vector<uint32_t> alive_positions() const;
  uint32_t owner_position(uint32_t key, const std::vector<uint32_t>& alive) const;
  uint32_t closest_preceding(const NodeState& n, uint32_t key) const;
  void place_entries();
  JoinStatus join_impl(uint32_t position, const NodeId& address,
                       const std::optional<NodeId>& bootstrap, double now);
  void commit_to_replicas(const VersionedTaskEntry& committed);

  OverlayConfig cfg_;
  RingSpace space_;
  std::map<uint32_t, NodeState> nodes_;      // keyed by position, all nodes
  std::map<NodeId, uint32_t> by_address_;
};

}  // namespace swiftbot
