// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <optional>
#include <string>

#include "swiftbot/calibration.hpp"
#include "swiftbot/decomposer/task.hpp"
#include "swiftbot/network.hpp"
#include "swiftbot/overlay/chord.hpp"
#include "swiftbot/pool/warm_pool.hpp"

namespace swiftbot {

struct ScoreWeights {
  double image = 0.5;
  double resources = 0.3;
  double volumes = 0.2;
};

struct SelectorConfig {
  ScoreWeights weights;
  double theta_match = 0.7;       // minimum score for a remote candidate
  double gamma = 0.5;             // migration gate: eta < gamma * cold_cost
  int k = 5;                      // successor fan-out of the distributed search
  double serialize_overhead_s = 0.05;
};

/// Which phases a policy runs. The full engine keeps everything on;
/// the keep-alive baseline drops the distributed search (and pays its
/// slower reuse path), the cold baseline drops both searches.
struct PhaseMask {
  bool local_search = true;
  bool remote_search = true;
  bool keep_alive_reuse = false;  // local hits cost reuse_s instead of handoff_s
};

enum class AllocationKind { kLocalWarm, kMigratedWarm, kColdStart };

const char* to_string(AllocationKind k);

struct AllocationDecision {
  AllocationKind kind = AllocationKind::kColdStart;
  std::string container_id;            // empty for a cold start
  std::optional<NodeId> source_node;   // set for migrations
  double score = 0.0;
  double eta_s = 0.0;                  // migration cost, migrations only
  double cold_cost_s = 0.0;
  double startup_latency_s = 0.0;      // handoff | eta + handoff | cold cost
};

/// Read-only access to every node's pool for the distributed search.
class PoolDirectory {
 public:
  virtual ~PoolDirectory() = default;
  virtual const WarmPool* pool_at(const NodeId& node) const = 0;
};

// Scoring model ---------------------------------------------------------------

/// 1 for an exact image match, 0.5 for hint-listed compatibility, else 0.
double image_match_term(const ContainerRecord& c, const Subtask& t);

/// w_img*s_img + w_res*min(1, min(c_cpu/T_cpu, c_mem/T_mem)) + w_vol*s_vol,
/// with s_vol = 1 when the task needs no volumes. Always in [0, 1] for
/// weights summing to 1.
double score(const ContainerRecord& c, const Subtask& t, const ScoreWeights& w);

/// 1 iff the image matches (exactly or listed-compatible) and the container
/// covers the task's cpu and memory.
int compat(const ContainerRecord& c, const Subtask& t);

/// state transfer over the link bandwidth plus serialization overhead.
double mig_cost(const ContainerRecord& c, const NodeId& src, const NodeId& dst,
                const LinkModel& links, double serialize_overhead_s);

/// pull + init from scratch for the task's image.
double cold_cost(const Subtask& t, const Calibration& cal);

/// Three-phase selection: local warm-pool search, DHT-wide search gated by
/// eta < gamma * cold_cost, cold-start fallback. Pure decision logic over
/// immutable snapshots; the caller realizes the outcome.
AllocationDecision select(const Subtask& t, const WarmPool& local_pool,
                          const NodeId& local_node, const ChordOverlay& overlay,
                          const PoolDirectory& pools, const LinkModel& links,
                          const Calibration& cal, const SelectorConfig& cfg,
                          const PhaseMask& phases = {});

}  // namespace swiftbot
