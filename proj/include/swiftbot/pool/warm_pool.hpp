// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "swiftbot/calibration.hpp"

namespace swiftbot {

enum class ContainerStatus { kWarming, kReady, kInUse, kDegraded, kEvicted };

const char* to_string(ContainerStatus s);

struct ContainerRecord {
  std::string container_id;
  std::string image;        // c_img
  double cpu = 0.0;         // c_cpu
  double mem_mib = 0.0;     // c_mem
  std::set<std::string> volumes;  // c_vol
  ContainerStatus status = ContainerStatus::kWarming;
  double state_size_mib = 0.0;
  double last_access = 0.0;
  int access_count = 0;
  double init_cost_s = 0.0;  // cold cost of this image
  bool stateful = false;
  double ready_at = 0.0;     // end of the warming phase
};

struct PoolConfig {
  int capacity = 8;              // concurrent warm containers per node
  double ttl_s = 600.0;          // keep-alive for idle ready records
  double probe_interval_s = 1.0;
  double prewarm_horizon_s = 10.0;
  double arrival_alpha = 0.3;    // EWMA constant for per-image arrival rates
};

struct PoolEvent {
  double time = 0.0;
  std::string kind;  // admit | ready | in_use | release | degrade | evict
  std::string container_id;
  std::string image;
  ContainerStatus prior = ContainerStatus::kWarming;
};

struct AdmitResult {
  bool admitted = false;
  std::string container_id;
  double ready_at = 0.0;
  std::vector<std::string> evicted;  // records displaced to make room
  std::string reject_reason;
};

struct MaintenanceReport {
  std::vector<std::string> promoted;                        // warming -> ready
  std::vector<std::string> ttl_evicted;                     // idle past ttl
  std::vector<std::pair<std::string, std::string>> degraded;  // (id, image)
};

/// Per-node inventory of pre-initialized containers.
///
/// Owned by the node's event handler; nothing here is thread-safe and
/// nothing needs to be. Time always arrives from the caller.
class WarmPool {
 public:
  WarmPool(std::string node, PoolConfig cfg, const Calibration& cal);

  const PoolConfig& config() const { return cfg_; }
  const std::string& node() const { return node_; }

  /// Admits a container in warming state; it becomes ready at the returned
  /// ready_at (resume_cost when preserved stateful state exists for the
  /// image, full init cost otherwise; init_override_s when the caller has
  /// already priced the warm-up). Runs eviction when at capacity; rejects
  /// when nothing is evictable.
  AdmitResult admit_warm(const std::string& image, double cpu, double mem_mib,
                         const std::set<std::string>& volumes, bool stateful,
                         double now,
                         std::optional<double> init_override_s = std::nullopt);

  /// Re-homes a migrated-in record; it becomes ready at `ready_at`.
  AdmitResult admit_migrated(const ContainerRecord& record, double now,
                             double ready_at);

  /// Ready records ordered by ascending retention score
  ///   RS = 0.4*norm(access_count) + 0.4*norm(init_cost) - 0.2*norm(mem),
  /// min-max normalized over the candidate set; ties evict the oldest
  /// last_access first. Returns up to `needed` ids; fewer when the pool has
  /// fewer evictable records.
  std::vector<std::string> evict_candidates(int needed, double now) const;

  /// Probes ready records and moves fault-injected ones to degraded.
  /// The caller schedules replacement admissions.
  std::vector<std::pair<std::string, std::string>> probe_health(double now);

  /// Fault hook: the next probe will find this record degraded.
  void inject_degradation(const std::string& container_id);

  /// (image, count) admissions that bring warm inventory up to the EWMA
  /// demand forecast over the prewarm horizon, clamped to free capacity.
  std::vector<std::pair<std::string, int>> prewarm_plan(double now) const;

  /// Demand signal for the pre-warm forecaster.
  void note_arrival(const std::string& image);

  /// Promotes warming records whose ready_at has passed.
  std::vector<std::string> refresh(double now);

  /// refresh + TTL expiry + health probe + arrival-rate EWMA step.
  MaintenanceReport maintenance_tick(double now, double dt);

  bool mark_in_use(const std::string& container_id, double now);
  bool release(const std::string& container_id, double now);  // back to ready
  bool evict(const std::string& container_id, double now);
  /// Removes a record that migrated away (no stateful preservation).
  std::optional<ContainerRecord> extract(const std::string& container_id, double now);

  const ContainerRecord* find(const std::string& container_id) const;
  std::vector<const ContainerRecord*> records() const;
  std::vector<const ContainerRecord*> ready_records() const;

  int occupancy() const;        // warming + ready + in_use + degraded
  int slots_free() const;
  int count(ContainerStatus status) const;
  int warm_count(const std::string& image) const;  // ready, by image
  int ready_or_warming(const std::string& image) const;
  double arrival_rate(const std::string& image) const;
  void set_arrival_rate(const std::string& image, double rate);  // tests

  const std::vector<PoolEvent>& events() const { return events_; }

 private:
  std::string next_id();
  void transition(ContainerRecord& rec, ContainerStatus to, double now,
                  const char* kind);
  double effective_init(const std::string& image, bool stateful) const;

  std::string node_;
  PoolConfig cfg_;
  const Calibration& cal_;
  std::map<std::string, ContainerRecord> records_;
  std::map<std::string, double> preserved_state_;  // image -> state_mib
  std::map<std::string, double> rate_ewma_;
  std::map<std::string, int> arrivals_since_tick_;
  std::set<std::string> degradation_flags_;
  std::vector<PoolEvent> events_;
  uint64_t seq_ = 0;
  double last_probe_ = -1e18;
};

}  // namespace swiftbot
