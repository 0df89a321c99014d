// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/sim/cluster_sim.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>

#include "swiftbot/common/digest.hpp"
#include "swiftbot/common/errors.hpp"
#include "swiftbot/common/rng.hpp"

namespace swiftbot {

namespace {

std::string stage_of(const std::string& sub_id) {
  auto dot = sub_id.rfind('.');
  std::string stage = dot == std::string::npos ? sub_id : sub_id.substr(dot + 1);
  auto dash = stage.rfind('-');
  if (dash != std::string::npos &&
      stage.find_first_not_of("0123456789", dash + 1) == std::string::npos) {
    stage = stage.substr(0, dash);
  }
  return stage;
}

}  // namespace

ClusterSim::ClusterSim(const SimConfig& cfg, Policy policy, MetricsCollector& metrics)
    : cfg_(cfg),
      policy_(policy),
      metrics_(metrics),
      links_(cfg.default_bandwidth_mibps, cfg.default_latency_s),
      overlay_(cfg.overlay),
      decomposer_(cfg.calibration.exec_seconds_by_image()),
      overload_(cfg.scheduler.overload_cpu, cfg.scheduler.overload_ticks),
      arrival_rng_(mix64(cfg.seed, 0xa11a)),
      jitter_rng_(mix64(cfg.seed, 0x71e5)) {
  for (const auto& [a, b, v] : cfg_.bandwidth_overrides) links_.set_bandwidth(a, b, v);
  for (const auto& [a, b, v] : cfg_.latency_overrides) links_.set_latency(a, b, v);
  if (cfg_.arrival.type == ArrivalConfig::Type::kPoisson) {
    rate_label_ = cfg_.arrival.rate_tasks_per_s;
  }
}

ClusterSim::~ClusterSim() = default;

const WarmPool* ClusterSim::pool_at(const NodeId& node) const {
  auto it = node_index_.find(node);
  if (it == node_index_.end()) return nullptr;
  const SimNode& n = nodes_[it->second];
  if (!n.responding || !overlay_.is_alive(node)) return nullptr;
  return n.pool.get();
}

size_t ClusterSim::node_index(const NodeId& addr) const {
  auto it = node_index_.find(addr);
  if (it == node_index_.end()) throw ConfigError("unknown sim node " + addr);
  return it->second;
}

PhaseMask ClusterSim::phase_mask() const {
  switch (policy_) {
    case Policy::kSwiftbot: return {true, true, false};
    case Policy::kLocalWarm: return {true, false, true};
    case Policy::kColdStart: return {false, false, false};
  }
  return {};
}

double ClusterSim::jitter() { return jitter_rng_.jitter(cfg_.noise.latency_sigma); }

double ClusterSim::transfer_stretch(size_t src_idx, size_t dst_idx) const {
  int inflight = std::max(nodes_[src_idx].transfers, nodes_[dst_idx].transfers);
  inflight = std::min(inflight, cfg_.noise.contention_cap);
  return 1.0 + cfg_.noise.transfer_contention * inflight;
}

double ClusterSim::handoff_stretch(size_t node_idx) const {
  const SimNode& n = nodes_[node_idx];
  return 1.0 + cfg_.noise.handoff_load_factor * (n.cpu_used / n.profile.cores);
}

int ClusterSim::effective_free_slots(const SimNode& node) const {
  // Ready records are reclaimable: reuse serves from them and migrations can
  // evict them. Cold launches run outside the warm inventory.
  return node.pool->slots_free() + node.pool->count(ContainerStatus::kReady);
}

// -- setup ---------------------------------------------------------------------

void ClusterSim::build_cluster() {
  for (size_t i = 0; i < cfg_.nodes.size(); ++i) {
    SimNode node;
    node.id = "node-" + std::to_string(i);
    node.profile = cfg_.nodes[i];
    PoolConfig pool_cfg = cfg_.pool;
    pool_cfg.capacity = cfg_.node_capacity(node.profile);
    node.pool = std::make_unique<WarmPool>(node.id, pool_cfg, cfg_.calibration);
    node_index_[node.id] = i;
    nodes_.push_back(std::move(node));
  }
  for (size_t i = 0; i < nodes_.size(); ++i) {
    std::optional<NodeId> bootstrap;
    if (i > 0) bootstrap = nodes_[0].id;
    JoinStatus st = overlay_.join(nodes_[i].id, bootstrap, 0.0);
    if (st != JoinStatus::kJoined) {
      throw ConfigError("node " + nodes_[i].id + " failed to join the overlay");
    }
  }
  for (const auto& node : nodes_) refresh_registry(node.id);

  for (TaskClass cls :
       {TaskClass::kNavigation, TaskClass::kManipulation, TaskClass::kPerception,
        TaskClass::kMultiRobot, TaskClass::kInspection, TaskClass::kHri,
        TaskClass::kMediaVideo, TaskClass::kMediaAudio}) {
    for (const StageRule& stage : Decomposer::pipeline(cls)) {
      image_sizing_[stage.image] = {stage.cpu, stage.mem_mib};
      image_volumes_[stage.image] = stage.volumes;
      for (const auto& vol : stage.volumes) {
        if (vol.rfind("models", 0) == 0) stateful_images_.insert(stage.image);
      }
    }
  }
  place_volumes();
  groups_ = form_groups(overlay_, cfg_.overlay.successor_count);
}

void ClusterSim::place_volumes() {
  std::set<std::string> volumes;
  for (const auto& [image, vols] : image_volumes_) {
    volumes.insert(vols.begin(), vols.end());
  }
  size_t i = 0;
  for (const auto& vol : volumes) {
    volume_hosts_[vol] = nodes_[i % nodes_.size()].id;
    ++i;
  }
}

void ClusterSim::schedule_arrivals() {
  if (cfg_.arrival.type == ArrivalConfig::Type::kTrace) {
    std::ifstream in(cfg_.arrival.trace_path);
    if (!in) throw ConfigError("cannot open trace: " + cfg_.arrival.trace_path);
    pending_arrivals_ = parse_trace(in);
  } else {
    double t = 0.0;
    int i = 0;
    while (true) {
      t += arrival_rng_.exponential(cfg_.arrival.rate_tasks_per_s);
      if (t >= cfg_.duration_s) break;
      TraceTask task;
      task.arrival_s = t;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "t-%06d", ++i);
      task.spec.task_id = buf;
      task.spec.task_class = cfg_.arrival.classes[arrival_rng_.uniform_index(
          cfg_.arrival.classes.size())];
      task.spec.instruction = to_string(task.spec.task_class);
      pending_arrivals_.push_back(std::move(task));
    }
  }
  std::stable_sort(pending_arrivals_.begin(), pending_arrivals_.end(),
                   [](const TraceTask& a, const TraceTask& b) {
                     return a.arrival_s < b.arrival_s;
                   });
  for (size_t i = 0; i < pending_arrivals_.size(); ++i) {
    queue_.schedule(pending_arrivals_[i].arrival_s, [this, i] { on_arrival(i); });
  }
}

void ClusterSim::schedule_failures() {
  for (const auto& ev : cfg_.failure_schedule) {
    if (!ev.time_s) continue;
    for (int idx : ev.nodes) {
      if (idx < 0 || idx >= static_cast<int>(nodes_.size())) {
        throw ConfigError("failure_schedule references node " + std::to_string(idx));
      }
      queue_.schedule(*ev.time_s, [this, idx, rejoin = ev.rejoin_after_s] {
        fail_node(static_cast<size_t>(idx), rejoin);
      });
    }
  }
}

void ClusterSim::refresh_registry(const NodeId& addr) {
  if (!overlay_.is_alive(addr)) return;
  NodeRegistry& reg = overlay_.registry(addr);
  const SimNode& node = nodes_[node_index(addr)];
  reg.warm_by_image.clear();
  for (const ContainerRecord* rec : node.pool->ready_records()) {
    ++reg.warm_by_image[rec->image];
  }
  reg.load_score = std::min(1.0, node.cpu_used / node.profile.cores);
  reg.availability_score =
      static_cast<double>(node.pool->slots_free()) / node.pool->config().capacity;
}

// -- run loop ------------------------------------------------------------------

ClusterSim::Totals ClusterSim::run() {
  build_cluster();
  schedule_arrivals();
  schedule_failures();
  totals_ = Totals{};

  queue_.schedule(cfg_.maintenance_interval_s, [this] { maintenance_tick(); });
  queue_.schedule(cfg_.overlay.stabilize_interval_s, [this] { stabilize_tick(); });

  while (queue_.run_next()) {
  }

  totals_.pending = totals_.injected - totals_.completed - totals_.failed;
  if (totals_.pending < 0) {
    throw InvariantViolation("task_conservation",
                             "completed+failed exceeds injected tasks");
  }
  return totals_;
}

bool ClusterSim::workload_finished() const {
  if (arrivals_scheduled_ < pending_arrivals_.size()) return false;
  return totals_.completed + totals_.failed >= totals_.injected;
}

void ClusterSim::maintenance_tick() {
  double now = queue_.now();
  if (now > cfg_.duration_s + cfg_.drain_limit_s) halted_ = true;

  for (auto& node : nodes_) {
    if (node.responding) overlay_.record_heartbeat(node.id, now);
  }
  for (const NodeId& dead : overlay_.detect_failures(now)) {
    handle_detected_failure(dead);
  }

  for (auto& node : nodes_) {
    if (!node.responding || !overlay_.is_alive(node.id)) continue;
    MaintenanceReport report =
        node.pool->maintenance_tick(now, cfg_.maintenance_interval_s);
    if (policy_ != Policy::kColdStart) {
      for (const auto& [id, image] : report.degraded) {
        auto sizing = image_sizing_.find(image);
        if (sizing == image_sizing_.end()) continue;
        node.pool->admit_warm(image, sizing->second.first, sizing->second.second,
                              image_volumes_[image], stateful_images_.count(image) > 0,
                              now, cfg_.calibration.cold_cost(image) * jitter());
      }
    }
    if (!report.promoted.empty()) schedule_dispatch();
  }

  if (policy_ == Policy::kSwiftbot && !halted_) {
    // Predictive pre-warming from the per-image EWMA demand forecast.
    for (auto& node : nodes_) {
      if (!node.responding || !overlay_.is_alive(node.id)) continue;
      for (const auto& [image, count] : node.pool->prewarm_plan(now)) {
        auto sizing = image_sizing_.find(image);
        if (sizing == image_sizing_.end()) continue;
        for (int i = 0; i < count; ++i) {
          double init = cfg_.calibration.cold_cost(image) *
                        (1.0 + cfg_.noise.transfer_contention *
                            std::min(node.transfers, cfg_.noise.contention_cap)) *
                        jitter();
          AdmitResult ar = node.pool->admit_warm(
              image, sizing->second.first, sizing->second.second,
              image_volumes_[image], stateful_images_.count(image) > 0, now, init);
          if (!ar.admitted) break;
          queue_.schedule(ar.ready_at, [this, idx = node_index(node.id)] {
            if (nodes_[idx].responding) {
              nodes_[idx].pool->refresh(queue_.now());
              schedule_dispatch();
            }
          });
        }
      }
    }

    // Overload detection: sustained cpu pressure or starved ready queue.
    for (auto& node : nodes_) {
      if (!node.responding || !overlay_.is_alive(node.id)) continue;
      double util = node.cpu_used / node.profile.cores;
      TaskRun* starved = nullptr;
      for (auto& [id, task] : tasks_) {
        if (task.done || task.coordinator != node.id) continue;
        for (const auto& [sid, sub] : task.subs) {
          if (sub.state == SubState::kReady &&
              now - sub.ready_time > 2 * cfg_.maintenance_interval_s) {
            if (!starved || task.seq < starved->seq) starved = &task;
            break;
          }
        }
      }
      if (overload_.on_tick(node.id, util, starved != nullptr)) {
        if (starved) {
          attempt_task_migration(*starved, MigrationReason::kOverload);
        } else {
          overload_.clear(node.id);
        }
      }
    }
  }

  if (cfg_.pool_snapshots) snapshot_pools();

  if (!halted_ && !workload_finished()) {
    queue_.schedule(now + cfg_.maintenance_interval_s, [this] { maintenance_tick(); });
  }
}

void ClusterSim::stabilize_tick() {
  double now = queue_.now();
  overlay_.stabilize(now);
  process_rejoins();
  for (const auto& node : nodes_) refresh_registry(node.id);
  groups_ = form_groups(overlay_, cfg_.overlay.successor_count);

  if (!deferred_migrations_.empty()) {
    std::set<std::string> retry;
    retry.swap(deferred_migrations_);
    for (const auto& task_id : retry) {
      auto it = tasks_.find(task_id);
      if (it == tasks_.end() || it->second.done) continue;
      attempt_task_migration(it->second, MigrationReason::kOverload);
    }
  }
  schedule_dispatch();

  if (!halted_ && !workload_finished()) {
    queue_.schedule(now + cfg_.overlay.stabilize_interval_s, [this] { stabilize_tick(); });
  }
}

void ClusterSim::snapshot_pools() {
  double now = queue_.now();
  for (const auto& node : nodes_) {
    if (!node.responding) continue;
    for (const ContainerRecord* rec : node.pool->records()) {
      metrics_.add(PoolSnapshotRow{now, node.id, rec->image, to_string(rec->status),
                                   rec->state_size_mib, rec->access_count,
                                   rec->last_access});
    }
  }
}

// -- arrivals and dispatch -------------------------------------------------------

void ClusterSim::on_arrival(size_t arrival_idx) {
  ++arrivals_scheduled_;
  if (halted_) return;
  const TraceTask& src = pending_arrivals_.at(arrival_idx);
  const std::string task_id = src.spec.task_id;

  TaskRun task;
  task.spec = src.spec;
  task.arrival = queue_.now();
  task.seq = totals_.injected;
  task.key = overlay_.space().reduce(ring_digest32(task_id));
  decomposer_.route(task.spec);  // cascade routing happens before decomposition
  task.dag = decomposer_.decompose(task.spec);
  for (size_t i = 0; i < task.dag.nodes.size(); ++i) {
    SubRun sub;
    sub.dag_index = i;
    const std::string& id = task.dag.nodes[i].subtask_id;
    if (task.dag.deps_of(id).empty()) {
      sub.state = SubState::kReady;
      sub.ready_time = task.arrival;
    }
    task.subs[id] = sub;
  }

  // Coarse scheduling: pick the coordinator group among the groups rooted at
  // the task key's k successors.
  std::vector<DynamicGroup> candidates;
  for (const NodeId& root :
       overlay_.successors_of_key(task.key, cfg_.selector.k)) {
    for (const auto& g : groups_) {
      if (g.root == root) {
        candidates.push_back(g);
        break;
      }
    }
  }
  if (candidates.empty()) {
    // Between failure and stabilization; fall back to the key owner.
    auto owner = overlay_.owner_of(task.key);
    if (!owner) throw SchedulingError("no live node for task " + task_id);
    DynamicGroup g;
    g.root = *owner;
    g.group_id = overlay_.position_of(*owner);
    g.members = group_members(*owner);
    candidates.push_back(g);
  }
  const DynamicGroup& chosen = select_group(task.dag.nodes[0], candidates,
                                            cfg_.scheduler, volume_hosts_);
  task.coordinator = chosen.root;

  // Incoming task patterns feed the pre-warm forecaster of every member
  // that may execute a stage of this task.
  for (const NodeId& member : chosen.members) {
    auto it = node_index_.find(member);
    if (it == node_index_.end() || !nodes_[it->second].responding) continue;
    for (const auto& st : task.dag.nodes) {
      nodes_[it->second].pool->note_arrival(st.image);
    }
  }

  VersionedTaskEntry entry;
  entry.task_key = task.key;
  entry.assigned_node = task.coordinator;
  entry.status = TaskStatus::kPending;
  entry.version.bump(task.coordinator);
  const NodeRegistry& reg = overlay_.registry(task.coordinator);
  entry.load_score = reg.load_score;
  entry.availability_score = reg.availability_score;
  overlay_.put_entry(entry);

  tasks_[task_id] = std::move(task);
  ++totals_.injected;
  schedule_dispatch();
}

void ClusterSim::schedule_dispatch(double at_time) {
  if (at_time > queue_.now()) {
    queue_.schedule(at_time, [this] { dispatch_pass(); });
    return;
  }
  if (dispatch_pending_) return;
  dispatch_pending_ = true;
  queue_.schedule(queue_.now(), [this] {
    dispatch_pending_ = false;
    dispatch_pass();
  });
}

std::vector<NodeId> ClusterSim::group_members(const NodeId& root) const {
  std::vector<NodeId> members{root};
  if (!overlay_.is_alive(root)) return {};
  for (uint32_t pos : overlay_.successor_list(root)) {
    auto addr = overlay_.address_at(pos);
    if (!addr || *addr == root) continue;
    if (static_cast<int>(members.size()) >= cfg_.overlay.successor_count) break;
    if (std::find(members.begin(), members.end(), *addr) == members.end()) {
      members.push_back(*addr);
    }
  }
  return members;
}

void ClusterSim::dispatch_pass() {
  if (halted_) return;
  double now = queue_.now();

  // Ready work grouped per coordinator, tasks in arrival order.
  std::vector<TaskRun*> order;
  for (auto& [id, task] : tasks_) {
    if (!task.done) order.push_back(&task);
  }
  std::sort(order.begin(), order.end(),
            [](const TaskRun* a, const TaskRun* b) { return a->seq < b->seq; });

  std::map<NodeId, std::vector<std::pair<TaskRun*, std::string>>> per_root;
  for (TaskRun* task : order) {
    if (now < task->dispatch_hold_until) {
      schedule_dispatch(task->dispatch_hold_until);
      continue;
    }
    if (!overlay_.is_alive(task->coordinator)) {
      auto owner = overlay_.owner_of(task->key);
      if (!owner) continue;
      task->coordinator = *owner;
    }
    for (auto& [sid, sub] : task->subs) {
      if (sub.state == SubState::kReady) {
        per_root[task->coordinator].emplace_back(task, sid);
      }
    }
  }

  for (auto& [root, items] : per_root) {
    std::vector<NodeId> members = group_members(root);
    std::vector<MemberState> member_states;
    for (const NodeId& m : members) {
      auto it = node_index_.find(m);
      if (it == node_index_.end()) continue;
      SimNode& n = nodes_[it->second];
      if (!n.responding) continue;
      MemberState ms;
      ms.node = m;
      ms.total_cpu = n.profile.cores;
      ms.total_mem_mib = n.profile.mem_mib;
      ms.free_cpu = n.profile.cores - n.cpu_used;
      ms.free_mem_mib = n.profile.mem_mib - n.mem_used;
      // Containers themselves are not the dispatch bottleneck (a cold launch
      // is always possible); cpu and memory are.
      ms.free_slots = 1 << 20;
      member_states.push_back(ms);
    }
    if (member_states.empty()) continue;

    std::vector<ReadySubtask> ready;
    std::map<std::string, TaskRun*> owner_of_sub;
    for (auto& [task, sid] : items) {
      ReadySubtask rs;
      rs.subtask = &task->dag.nodes[task->subs.at(sid).dag_index];
      if (task->spec.deadline_s) rs.deadline_s = task->arrival + *task->spec.deadline_s;
      rs.seq = task->seq * 1000 + task->subs.at(sid).dag_index;
      ready.push_back(rs);
      owner_of_sub[sid] = task;
    }

    auto warm_count = [this](const NodeId& node, const std::string& image) {
      auto it = node_index_.find(node);
      if (it == node_index_.end()) return 0;
      return nodes_[it->second].pool->warm_count(image);
    };
    ScheduleResult result = coordinator_schedule(ready, member_states, warm_count);

    for (const auto& item : result.dispatched) {
      TaskRun* task = owner_of_sub.at(item.subtask_id);
      begin_allocation(*task, item.subtask_id, node_index(item.node));
    }
    for (const auto& sid : result.infeasible) {
      TaskRun* task = owner_of_sub.at(sid);
      if (!deferred_migrations_.count(task->spec.task_id)) {
        attempt_task_migration(*task, MigrationReason::kOverload);
      }
    }
  }
}

// -- allocation ----------------------------------------------------------------

void ClusterSim::begin_allocation(TaskRun& task, const std::string& sub_id,
                                  size_t node_idx) {
  double now = queue_.now();
  SubRun& sub = task.subs.at(sub_id);
  const Subtask& st = task.dag.nodes[sub.dag_index];
  SimNode& node = nodes_[node_idx];

  sub.state = SubState::kAllocating;
  sub.node_idx = node_idx;
  ++sub.attempt;
  const int attempt = sub.attempt;
  const double queue_wait = now - sub.ready_time;

  node.cpu_used += st.cpu;
  node.mem_used += st.mem_mib;

  AllocationDecision d = select(st, *node.pool, node.id, overlay_, *this, links_,
                                cfg_.calibration, cfg_.selector, phase_mask());

  double realized = 0.0;
  size_t src_idx = SIZE_MAX;
  switch (d.kind) {
    case AllocationKind::kLocalWarm: {
      node.pool->mark_in_use(d.container_id, now);
      sub.container_id = d.container_id;
      realized = d.startup_latency_s * handoff_stretch(node_idx) * jitter();
      ++totals_.local_hits;
      break;
    }
    case AllocationKind::kMigratedWarm: {
      src_idx = node_index(*d.source_node);
      SimNode& src = nodes_[src_idx];
      bool can_admit = node.pool->slots_free() > 0 ||
                       !node.pool->evict_candidates(1, now).empty();
      if (!can_admit) {  // inventory full of busy containers; launch fresh
        d.kind = AllocationKind::kColdStart;
        d.startup_latency_s = d.cold_cost_s;
        src_idx = SIZE_MAX;
        break;
      }
      auto rec = src.pool->extract(d.container_id, now);
      if (!rec) {  // raced away; fall back to cold
        d.kind = AllocationKind::kColdStart;
        d.startup_latency_s = d.cold_cost_s;
        src_idx = SIZE_MAX;
        break;
      }
      double base_transfer = d.eta_s - cfg_.selector.serialize_overhead_s;
      double eta_real = base_transfer * transfer_stretch(src_idx, node_idx) * jitter() +
                        cfg_.selector.serialize_overhead_s;
      double handoff_real =
          cfg_.calibration.handoff(st.image) * handoff_stretch(node_idx) * jitter();
      realized = eta_real + handoff_real;
      ++src.transfers;
      ++node.transfers;
      node.pool->admit_migrated(*rec, now, now + eta_real);
      sub.container_id = d.container_id;
      queue_.schedule(now + eta_real, [this, node_idx, src_idx, id = d.container_id,
                                       task_id = task.spec.task_id, sub_id, attempt] {
        SimNode& dst = nodes_[node_idx];
        SimNode& from = nodes_[src_idx];
        if (from.transfers > 0) --from.transfers;
        if (dst.transfers > 0) --dst.transfers;
        if (!dst.responding) return;
        dst.pool->refresh(queue_.now());
        auto it = tasks_.find(task_id);
        bool live = it != tasks_.end() && !it->second.done &&
                    it->second.subs.at(sub_id).attempt == attempt;
        if (live) {
          dst.pool->mark_in_use(id, queue_.now());
        } else if (dst.pool->find(id)) {
          dst.pool->evict(id, queue_.now());
        }
      });
      ++totals_.migrations;
      break;
    }
    case AllocationKind::kColdStart:
      break;
  }

  if (d.kind == AllocationKind::kColdStart) {
    // Fresh launch outside the warm inventory: pull and initialize, sharing
    // the node's transfer path with other in-flight pulls and migrations.
    double cold_real = d.cold_cost_s *
                       (1.0 + cfg_.noise.transfer_contention *
                            std::min(node.transfers, cfg_.noise.contention_cap)) *
                       jitter();
    sub.container_id = node.id + "/cold" + std::to_string(node.cold_seq++);
    realized = cold_real;
    ++node.transfers;
    ++totals_.cold_starts;
    queue_.schedule(now + cold_real, [this, node_idx] {
      if (nodes_[node_idx].transfers > 0) --nodes_[node_idx].transfers;
    });
  }

  metrics_.add(SelectionAudit{now, sub_id, to_string(d.kind), sub.container_id,
                              d.score, d.eta_s, d.cold_cost_s, realized, node.id,
                              to_string(policy_)});

  queue_.schedule(now + realized,
                  [this, task_id = task.spec.task_id, sub_id, attempt, src_idx,
                   queue_wait, d, realized] {
                    on_alloc_complete(task_id, sub_id, attempt, src_idx, queue_wait,
                                      d, realized);
                  });
}

void ClusterSim::on_alloc_complete(const std::string& task_id,
                                   const std::string& sub_id, int attempt,
                                   size_t src_idx, double queue_wait,
                                   const AllocationDecision& decision,
                                   double realized_latency) {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end() || it->second.done) return;
  TaskRun& task = it->second;
  SubRun& sub = task.subs.at(sub_id);
  if (sub.attempt != attempt || sub.state != SubState::kAllocating) return;
  SimNode& node = nodes_[sub.node_idx];
  if (!node.responding) return;
  if (src_idx != SIZE_MAX && !nodes_[src_idx].responding &&
      !node.pool->find(sub.container_id)) {
    return;  // transfer source died mid-flight; failure handling requeues
  }

  double now = queue_.now();
  emit_startup_sample(queue_wait + realized_latency, node.id);
  if (decision.kind == AllocationKind::kLocalWarm) {
    metrics_.add(MetricSample{MetricKind::kPoolHit, 1.0, to_string(policy_),
                              rate_label_, std::nullopt, node.id, now});
  } else if (decision.kind == AllocationKind::kMigratedWarm) {
    metrics_.add(MetricSample{MetricKind::kMigrationCount, 1.0, to_string(policy_),
                              rate_label_, std::nullopt, node.id, now});
  }
  if (task.awaiting_recovery) {
    metrics_.add(MetricSample{MetricKind::kRecoveryTime, now - task.failure_time,
                              to_string(policy_), rate_label_, std::nullopt,
                              std::string(), now});
    task.awaiting_recovery = false;
  }

  sub.state = SubState::kRunning;
  sub.exec_started = now;
  const Subtask& st = task.dag.nodes[sub.dag_index];
  double exec = cfg_.calibration.at(st.image).exec_s / node.profile.speed * jitter();
  queue_.schedule(now + exec, [this, task_id, sub_id, attempt] {
    on_exec_complete(task_id, sub_id, attempt);
  });
}

void ClusterSim::on_exec_complete(const std::string& task_id,
                                  const std::string& sub_id, int attempt) {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end() || it->second.done) return;
  TaskRun& task = it->second;
  SubRun& sub = task.subs.at(sub_id);
  if (sub.attempt != attempt || sub.state != SubState::kRunning) return;
  SimNode& node = nodes_[sub.node_idx];
  if (!node.responding) return;

  double now = queue_.now();
  if (++sub.completions > 1) {
    throw InvariantViolation("exactly_once", sub_id + " completed twice");
  }
  sub.state = SubState::kDone;

  const Subtask& st = task.dag.nodes[sub.dag_index];
  if (node.pool->find(sub.container_id)) {
    node.pool->release(sub.container_id, now);
  } else if (policy_ != Policy::kColdStart) {
    // Keep-alive: the cold-launched container joins the warm inventory,
    // evicting a low-retention record if the pool is full. Rejection means
    // the container is simply torn down.
    ContainerRecord rec;
    rec.container_id = sub.container_id;
    rec.image = st.image;
    auto sizing = image_sizing_.find(st.image);
    rec.cpu = sizing != image_sizing_.end() ? sizing->second.first : st.cpu;
    rec.mem_mib = sizing != image_sizing_.end() ? sizing->second.second : st.mem_mib;
    auto vols = image_volumes_.find(st.image);
    rec.volumes = vols != image_volumes_.end() ? vols->second : st.volumes;
    rec.state_size_mib = cfg_.calibration.at(st.image).state_mib;
    rec.access_count = 1;
    rec.last_access = now;
    rec.init_cost_s = cfg_.calibration.cold_cost(st.image);
    rec.stateful = stateful_images_.count(st.image) > 0;
    AdmitResult ar = node.pool->admit_migrated(rec, now, now);
    if (ar.admitted) node.pool->refresh(now);
  }
  node.cpu_used -= st.cpu;
  node.mem_used -= st.mem_mib;
  ++overlay_.registry(node.id).successes;

  task.completed.insert(sub_id);
  std::string stage = stage_of(sub_id);
  double duration = now - sub.exec_started;
  auto dur = task.stage_durations.find(stage);
  if (dur == task.stage_durations.end() || dur->second < duration) {
    task.stage_durations[stage] = duration;
  }

  for (const auto& [from, to] : task.dag.edges) {
    if (from != sub_id) continue;
    SubRun& dep = task.subs.at(to);
    if (dep.state != SubState::kBlocked) continue;
    bool all_done = true;
    for (const auto& d : task.dag.deps_of(to)) {
      if (!task.completed.count(d)) {
        all_done = false;
        break;
      }
    }
    if (all_done) {
      dep.state = SubState::kReady;
      dep.ready_time = now;
    }
  }

  if (task.completed.size() == task.dag.nodes.size()) {
    task.done = true;
    ++totals_.completed;
    decomposer_.record_feedback(task_id, TaskOutcome::kSuccess, task.stage_durations);
    if (auto current = overlay_.get_entry(task.key)) {
      VersionedTaskEntry entry = *current;
      entry.status = TaskStatus::kDone;
      entry.version.bump(task.coordinator);
      overlay_.put_entry(entry);
    }
  }
  schedule_dispatch();
}

void ClusterSim::requeue_subtask(TaskRun& task, const std::string& sub_id) {
  SubRun& sub = task.subs.at(sub_id);
  if (sub.state != SubState::kAllocating && sub.state != SubState::kRunning) return;
  if (sub.node_idx != SIZE_MAX) {
    SimNode& node = nodes_[sub.node_idx];
    if (node.responding) {
      const Subtask& st = task.dag.nodes[sub.dag_index];
      node.cpu_used -= st.cpu;
      node.mem_used -= st.mem_mib;
      if (node.pool->find(sub.container_id)) {
        const ContainerRecord* rec = node.pool->find(sub.container_id);
        if (rec->status == ContainerStatus::kInUse) {
          node.pool->release(sub.container_id, queue_.now());
        }
      }
    }
  }
  ++sub.attempt;  // invalidate in-flight events
  sub.state = SubState::kReady;
  sub.ready_time = queue_.now();
  sub.node_idx = SIZE_MAX;
  sub.container_id.clear();
}

// -- churn ----------------------------------------------------------------------

void ClusterSim::fail_node(size_t idx, double rejoin_after_s) {
  if (halted_) return;
  SimNode& node = nodes_[idx];
  if (!node.responding) return;
  double now = queue_.now();
  node.responding = false;
  node.crash_time = now;
  overlay_.crash(node.id);
  if (rejoin_after_s > 0) {
    queue_.schedule(now + rejoin_after_s, [this, idx] {
      pending_rejoins_.emplace_back(queue_.now(), nodes_[idx].id);
    });
  }
}

void ClusterSim::handle_detected_failure(const NodeId& addr) {
  size_t idx = node_index(addr);
  SimNode& node = nodes_[idx];
  double now = queue_.now();
  double crash = node.crash_time > 0 ? node.crash_time : now;
  ++overlay_.registry(addr).failures;

  collect_pool_events(*node.pool);
  node.cpu_used = 0;
  node.mem_used = 0;
  node.transfers = 0;

  for (auto& [task_id, task] : tasks_) {
    if (task.done) continue;
    bool affected = false;
    for (auto& [sid, sub] : task.subs) {
      if ((sub.state == SubState::kAllocating || sub.state == SubState::kRunning) &&
          sub.node_idx == idx) {
        ++sub.attempt;
        sub.state = SubState::kReady;
        sub.ready_time = now;
        sub.node_idx = SIZE_MAX;
        sub.container_id.clear();
        affected = true;
      }
    }
    if (affected) {
      task.awaiting_recovery = true;
      task.failure_time = crash;
    }
    if (task.coordinator == addr) {
      auto owner = overlay_.owner_of(task.key);
      if (owner) {
        // Re-elect through ring succession and reassign via the protocol.
        MigrationRequest req;
        req.reason = MigrationReason::kFailure;
        req.current_node = *owner;
        req.task_key = task.key;
        req.task_id = task_id;
        req.num_containers = 1;
        metrics_.add(MigrationAudit{now, "request", task_id, addr, *owner,
                                    to_string(req.reason), to_string(policy_)});
        CommitResult commit =
            commit_migration(req, *owner, checkpoint_of(task), &task.dag, overlay_,
                             links_, cfg_.selector.serialize_overhead_s);
        task.coordinator = commit.entry.assigned_node;
        metrics_.add(MigrationAudit{
            now, commit.status == CommitResult::kCommitted ? "commit" : "abort",
            task_id, addr, task.coordinator, to_string(req.reason),
            to_string(policy_)});
      }
    }
  }
  schedule_dispatch();
}

void ClusterSim::process_rejoins() {
  if (pending_rejoins_.empty()) return;
  double now = queue_.now();
  std::vector<std::pair<double, NodeId>> pending;
  pending.swap(pending_rejoins_);
  for (const auto& [requested_at, addr] : pending) {
    std::optional<NodeId> bootstrap;
    for (const auto& n : nodes_) {
      if (n.id != addr && n.responding && overlay_.is_alive(n.id)) {
        bootstrap = n.id;
        break;
      }
    }
    size_t idx = node_index(addr);
    SimNode& node = nodes_[idx];
    JoinStatus st = overlay_.join(addr, bootstrap, now);
    if (st != JoinStatus::kJoined) {
      pending_rejoins_.emplace_back(requested_at, addr);  // retry next round
      continue;
    }
    collect_pool_events(*node.pool);
    PoolConfig pool_cfg = cfg_.pool;
    pool_cfg.capacity = cfg_.node_capacity(node.profile);
    node.pool = std::make_unique<WarmPool>(addr, pool_cfg, cfg_.calibration);
    node.responding = true;
    node.cpu_used = 0;
    node.mem_used = 0;
    node.transfers = 0;
    node.crash_time = 0;
    refresh_registry(addr);
    metrics_.add(MetricSample{MetricKind::kRecoveryTime, now - requested_at,
                              to_string(policy_), rate_label_, std::nullopt, addr,
                              now});
  }
}

// -- task migration (figure-2 path) ----------------------------------------------

void ClusterSim::attempt_task_migration(TaskRun& task, MigrationReason reason) {
  double now = queue_.now();
  const Subtask* pending = nullptr;
  int pending_count = 0;
  for (const auto& [sid, sub] : task.subs) {
    if (sub.state == SubState::kReady) {
      if (!pending) pending = &task.dag.nodes[sub.dag_index];
      ++pending_count;
    }
  }
  if (!pending) {
    overload_.clear(task.coordinator);
    return;
  }

  MigrationRequest req;
  req.reason = reason;
  req.current_node = task.coordinator;
  req.task_key = task.key;
  req.task_id = task.spec.task_id;
  req.num_containers = std::max(1, pending_count);
  req.image = pending->image;
  req.required_volumes = pending->volumes;

  metrics_.add(MigrationAudit{now, "request", req.task_id, req.current_node, "",
                              to_string(reason), to_string(policy_)});
  auto route = overlay_.lookup_from(req.current_node, req.task_key);
  double fetch_latency = route ? route->hops * cfg_.default_latency_s : 0.0;
  metrics_.add(MigrationAudit{now + fetch_latency, "fetch", req.task_id,
                              req.current_node, route ? route->owner : "",
                              to_string(reason), to_string(policy_)});

  auto has_capacity = [this](const NodeId& n) {
    auto it = node_index_.find(n);
    if (it == node_index_.end()) return false;
    const SimNode& node = nodes_[it->second];
    if (!node.responding) return false;
    return effective_free_slots(node) > 0 &&
           node.cpu_used / node.profile.cores < cfg_.scheduler.overload_cpu;
  };
  TargetChoice choice =
      request_migration(req, overlay_, cfg_.selector.k, cfg_.scheduler,
                        volume_hosts_, links_, has_capacity);
  if (choice.status == TargetChoice::kDeferred) {
    metrics_.add(MigrationAudit{now + fetch_latency, "defer", req.task_id,
                                req.current_node, "", to_string(reason),
                                to_string(policy_)});
    deferred_migrations_.insert(req.task_id);
    return;
  }
  metrics_.add(MigrationAudit{now + fetch_latency, "find", req.task_id,
                              req.current_node, choice.target, to_string(reason),
                              to_string(policy_)});

  CommitResult commit =
      commit_migration(req, choice.target, checkpoint_of(task), &task.dag, overlay_,
                       links_, cfg_.selector.serialize_overhead_s);
  overload_.clear(req.current_node);
  deferred_migrations_.erase(req.task_id);
  if (commit.status == CommitResult::kCommitted) {
    task.coordinator = choice.target;
    task.dispatch_hold_until = now + fetch_latency + commit.transfer_s;
    metrics_.add(MigrationAudit{now + fetch_latency + commit.transfer_s, "commit",
                                req.task_id, req.current_node, choice.target,
                                to_string(reason), to_string(policy_)});
    metrics_.add(MetricSample{MetricKind::kMigrationCount, 1.0, to_string(policy_),
                              rate_label_, std::nullopt, choice.target, now});
    schedule_dispatch(task.dispatch_hold_until);
  } else {
    ++totals_.put_conflicts;
    task.coordinator = commit.entry.assigned_node;
    metrics_.add(MigrationAudit{now + fetch_latency, "abort", req.task_id,
                                req.current_node, task.coordinator,
                                to_string(reason), to_string(policy_)});
    schedule_dispatch();
  }
}

// -- misc -------------------------------------------------------------------------

const Subtask& ClusterSim::subtask_of(const TaskRun& task,
                                      const std::string& sub_id) const {
  return task.dag.nodes[task.subs.at(sub_id).dag_index];
}

Checkpoint ClusterSim::checkpoint_of(const TaskRun& task) const {
  Checkpoint cp;
  cp.task_key = task.key;
  cp.completed_subtasks = task.completed;
  cp.partial_results_mib = 2.0 * task.completed.size();
  cp.taken_at = queue_.now();
  return cp;
}

void ClusterSim::emit_startup_sample(double value, const NodeId& node) {
  metrics_.add(MetricSample{MetricKind::kStartupLatency, value, to_string(policy_),
                            rate_label_, std::nullopt, node, queue_.now()});
}

void ClusterSim::collect_pool_events(WarmPool& pool) {
  const auto& ev = pool.events();
  pool_events_.insert(pool_events_.end(), ev.begin(), ev.end());
}

std::vector<PoolEvent> ClusterSim::all_pool_events() const {
  std::vector<PoolEvent> out = pool_events_;
  for (const auto& node : nodes_) {
    const auto& ev = node.pool->events();
    out.insert(out.end(), ev.begin(), ev.end());
  }
  return out;
}

}  // namespace swiftbot
