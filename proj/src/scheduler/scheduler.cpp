// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/scheduler/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace swiftbot {

const char* to_string(MigrationReason r) {
  switch (r) {
    case MigrationReason::kOverload: return "overload";
    case MigrationReason::kFailure: return "failure";
    case MigrationReason::kRebalance: return "rebalance";
  }
  return "?";
}

bool checkpoint_closed(const Checkpoint& cp, const SubtaskDag& dag) {
  for (const auto& id : cp.completed_subtasks) {
    if (!dag.node(id)) return false;
    for (const auto& dep : dag.deps_of(id)) {
      if (!cp.completed_subtasks.count(dep)) return false;
    }
  }
  return true;
}

std::vector<DynamicGroup> form_groups(const ChordOverlay& overlay, int r) {
  std::vector<DynamicGroup> groups;
  for (const NodeId& root : overlay.live_nodes()) {
    DynamicGroup g;
    g.group_id = overlay.position_of(root);
    g.root = root;
    g.members.push_back(root);
    for (uint32_t pos : overlay.successor_list(root)) {
      auto addr = overlay.address_at(pos);
      if (!addr || *addr == root) continue;
      if (static_cast<int>(g.members.size()) >= r) break;
      if (std::find(g.members.begin(), g.members.end(), *addr) == g.members.end()) {
        g.members.push_back(*addr);
      }
    }
    double load_sum = 0.0;
    for (const NodeId& m : g.members) {
      const NodeRegistry& reg = overlay.registry(m);
      load_sum += reg.load_score;
      for (const auto& [image, count] : reg.warm_by_image) {
        g.warm_index[image] += count;
      }
    }
    g.load = g.members.empty() ? 0.0 : load_sum / g.members.size();
    groups.push_back(std::move(g));
  }
  return groups;
}

const DynamicGroup& select_group(const Subtask& subtask,
                                 const std::vector<DynamicGroup>& groups,
                                 const SchedulerWeights& w,
                                 const std::map<std::string, NodeId>& volume_hosts) {
  if (groups.empty()) {
    throw SchedulingError("no live group available for " + subtask.subtask_id);
  }

  auto locality = [&](const DynamicGroup& g) {
    if (subtask.volumes.empty()) return 1.0;
    size_t hosted = 0;
    for (const auto& vol : subtask.volumes) {
      auto it = volume_hosts.find(vol);
      if (it == volume_hosts.end()) continue;
      if (std::find(g.members.begin(), g.members.end(), it->second) != g.members.end()) {
        ++hosted;
      }
    }
    return static_cast<double>(hosted) / subtask.volumes.size();
  };

  const DynamicGroup* best = nullptr;
  double best_score = -1.0;
  for (const DynamicGroup& g : groups) {
    auto warm_it = g.warm_index.find(subtask.image);
    double warm = (warm_it != g.warm_index.end() && warm_it->second > 0) ? 1.0 : 0.0;
    double score = w.group_load * (1.0 - g.load) + w.group_locality * locality(g) +
                   w.group_warm * warm;
    if (!best || score > best_score ||
        (score == best_score && g.group_id < best->group_id)) {
      best = &g;
      best_score = score;
    }
  }
  return *best;
}

ScheduleResult coordinator_schedule(
    std::vector<ReadySubtask> ready, std::vector<MemberState>& members,
    const std::function<int(const NodeId&, const std::string&)>& warm_count) {
  // EDF: deadlines ascending, deadline-less last, FIFO within a class.
  std::stable_sort(ready.begin(), ready.end(),
                   [](const ReadySubtask& a, const ReadySubtask& b) {
                     if (a.deadline_s.has_value() != b.deadline_s.has_value()) {
                       return a.deadline_s.has_value();
                     }
                     if (a.deadline_s && b.deadline_s && *a.deadline_s != *b.deadline_s) {
                       return *a.deadline_s < *b.deadline_s;
                     }
                     return a.seq < b.seq;
                   });

  ScheduleResult result;
  for (const ReadySubtask& item : ready) {
    const Subtask& st = *item.subtask;

    bool fits_anywhere = false;
    for (const MemberState& m : members) {
      if (m.total_cpu >= st.cpu && m.total_mem_mib >= st.mem_mib) {
        fits_anywhere = true;
        break;
      }
    }
    if (!fits_anywhere) {
      result.infeasible.push_back(st.subtask_id);
      continue;
    }

    // Least-loaded member first; warm inventory breaks ties. Load spreading
    // keeps the hot node from draining every pool at once, so bursts exhaust
    // one node while its peers still hold warm containers to migrate.
    MemberState* chosen = nullptr;
    int chosen_warm = -1;
    for (MemberState& m : members) {
      if (m.free_cpu < st.cpu || m.free_mem_mib < st.mem_mib || m.free_slots < 1) {
        continue;
      }
      int warm = warm_count ? warm_count(m.node, st.image) : 0;
      bool better = false;
      if (!chosen) {
        better = true;
      } else if (m.free_cpu != chosen->free_cpu) {
        better = m.free_cpu > chosen->free_cpu;
      } else if (warm != chosen_warm) {
        better = warm > chosen_warm;
      } else {
        better = m.node < chosen->node;
      }
      if (better) {
        chosen = &m;
        chosen_warm = warm;
      }
    }
    if (!chosen) continue;  // stays queued until capacity frees up

    chosen->free_cpu -= st.cpu;
    chosen->free_mem_mib -= st.mem_mib;
    chosen->free_slots -= 1;
    result.dispatched.push_back({st.subtask_id, chosen->node});
  }
  return result;
}

TargetChoice request_migration(
    const MigrationRequest& req, const ChordOverlay& overlay, int k,
    const SchedulerWeights& w, const std::map<std::string, NodeId>& volume_hosts,
    const LinkModel& links, const std::function<bool(const NodeId&)>& has_capacity) {
  struct Scored {
    NodeId node;
    double warm_fit;
    double distance;
    double load;
    double history;
  };

  std::vector<Scored> candidates;
  for (const NodeId& node : overlay.successors_of_key(req.task_key, k)) {
    if (node == req.current_node) continue;
    if (!overlay.is_alive(node)) continue;
    const NodeRegistry& reg = overlay.registry(node);
    auto warm_it = reg.warm_by_image.find(req.image);
    int warm = warm_it == reg.warm_by_image.end() ? 0 : warm_it->second;
    double warm_fit =
        std::min(1.0, static_cast<double>(warm) / std::max(1, req.num_containers));
    double distance = 0.0;
    if (!req.required_volumes.empty()) {
      for (const auto& vol : req.required_volumes) {
        auto host = volume_hosts.find(vol);
        if (host != volume_hosts.end()) {
          distance += links.latency_s(node, host->second);
        }
      }
      distance /= req.required_volumes.size();
    }
    candidates.push_back({node, warm_fit, distance, reg.load_score, reg.history_score()});
  }

  double d_min = 1e300, d_max = -1e300;
  for (const Scored& c : candidates) {
    d_min = std::min(d_min, c.distance);
    d_max = std::max(d_max, c.distance);
  }

  TargetChoice choice;
  for (const Scored& c : candidates) {
    if (c.warm_fit <= 0.0) continue;
    if (has_capacity && !has_capacity(c.node)) continue;
    double proximity =
        (d_max > d_min) ? 1.0 - (c.distance - d_min) / (d_max - d_min) : 1.0;
    double score = w.target_warm_fit * c.warm_fit + w.target_load * (1.0 - c.load) +
                   w.target_proximity * proximity + w.target_history * c.history;
    if (choice.status == TargetChoice::kDeferred || score > choice.score ||
        (score == choice.score && c.node < choice.target)) {
      choice.status = TargetChoice::kTarget;
      choice.target = c.node;
      choice.score = score;
    }
  }
  return choice;  // kDeferred: retry after the next stabilization round
}

CommitResult commit_migration(const MigrationRequest& req, const NodeId& target,
                              const Checkpoint& checkpoint, const SubtaskDag* dag,
                              ChordOverlay& overlay, const LinkModel& links,
                              double serialize_overhead_s) {
  if (dag && !checkpoint_closed(checkpoint, *dag)) {
    throw SchedulingError("checkpoint for key " + std::to_string(req.task_key) +
                          " is not dependency-closed");
  }

  VersionedTaskEntry entry;
  entry.task_key = req.task_key;
  if (auto current = overlay.get_entry(req.task_key)) {
    entry.version = current->version;
    entry.containers_allocated = current->containers_allocated;
  }
  entry.assigned_node = target;
  entry.status = TaskStatus::kInProgress;
  entry.containers_allocated = req.num_containers;
  entry.version.bump(req.current_node);
  const NodeRegistry& reg = overlay.registry(target);
  entry.load_score = reg.load_score;
  entry.availability_score = reg.availability_score;

  PutResult put = overlay.put_entry(entry);
  CommitResult result;
  result.entry = put.committed;
  if (!put.accepted()) {
    result.status = CommitResult::kAborted;
    return result;
  }
  result.status = CommitResult::kCommitted;
  result.transfer_s =
      checkpoint.partial_results_mib / links.bandwidth_mibps(req.current_node, target) +
      serialize_overhead_s;
  return result;
}

bool OverloadDetector::on_tick(const NodeId& node, double cpu_util,
                               bool queued_infeasible) {
  Track& track = tracks_[node];
  track.consecutive_high = cpu_util > threshold_ ? track.consecutive_high + 1 : 0;
  if (track.outstanding) return false;
  if (track.consecutive_high >= ticks_ || queued_infeasible) {
    track.outstanding = true;
    return true;
  }
  return false;
}

void OverloadDetector::clear(const NodeId& node) {
  auto it = tracks_.find(node);
  if (it != tracks_.end()) {
    it->second.outstanding = false;
    it->second.consecutive_high = 0;
  }
}

bool OverloadDetector::outstanding(const NodeId& node) const {
  auto it = tracks_.find(node);
  return it != tracks_.end() && it->second.outstanding;
}

}  // namespace swiftbot
