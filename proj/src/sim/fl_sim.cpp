// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/sim/fl_sim.hpp"

#include <algorithm>
#include <cmath>

#include "swiftbot/common/digest.hpp"
#include "swiftbot/common/errors.hpp"
#include "swiftbot/common/rng.hpp"

namespace swiftbot {

namespace {
const char* kTrainerImage = "fl_trainer";
}

const char* to_string(AggregationMode m) {
  switch (m) {
    case AggregationMode::kCentralSync: return "central_sync";
    case AggregationMode::kDhtPooled: return "dht_pooled";
  }
  return "?";
}

FlSim::FlSim(const SimConfig& cfg, const std::string& profile_name, int clients,
             AggregationMode mode, MetricsCollector& metrics)
    : cfg_(cfg),
      profile_name_(profile_name),
      n_clients_(clients),
      mode_(mode),
      metrics_(metrics),
      links_(cfg.default_bandwidth_mibps, cfg.default_latency_s),
      overlay_(cfg.overlay) {
  auto it = cfg_.fl.profiles.find(profile_name);
  if (it == cfg_.fl.profiles.end()) {
    throw ConfigError("unknown fl profile '" + profile_name + "'");
  }
  profile_ = it->second;
  if (clients != 8 && clients != 16 && clients != 24 && clients != 32) {
    throw ConfigError("fl clients must be one of {8, 16, 24, 32}");
  }
}

double FlSim::compute_seconds(int round, int client) const {
  Rng rng(mix64(cfg_.seed,
                mix64(fnv1a64(profile_name_),
                      static_cast<uint64_t>(round) * 1000 + client)));
  return rng.lognormal(profile_.median_s, profile_.sigma);
}

void FlSim::set_idle_registry(int idx, bool idle) {
  if (!overlay_.is_alive(clients_[idx].id)) return;
  NodeRegistry& reg = overlay_.registry(clients_[idx].id);
  reg.warm_by_image[kTrainerImage] = idle ? 1 : 0;
  reg.load_score = idle ? 0.0 : 1.0;
}

FlSim::Result FlSim::run(const std::vector<FailureEvent>& failure_schedule) {
  for (const auto& ev : failure_schedule) {
    if (!ev.round) continue;
    for (int c : ev.clients) {
      if (c < 0 || c >= n_clients_) {
        throw ConfigError("failure_schedule references client " + std::to_string(c));
      }
      double rejoin = ev.rejoin_after_s > 0 ? ev.rejoin_after_s : cfg_.fl.rejoin_after_s;
      failures_by_round_[*ev.round].emplace_back(c, rejoin);
    }
  }

  for (int i = 0; i < n_clients_; ++i) {
    Client c;
    c.id = "client-" + std::to_string(i);
    clients_.push_back(c);
  }
  if (mode_ == AggregationMode::kDhtPooled) {
    for (int i = 0; i < n_clients_; ++i) {
      std::optional<NodeId> bootstrap;
      if (i > 0) bootstrap = clients_[0].id;
      if (overlay_.join(clients_[i].id, bootstrap, 0.0) != JoinStatus::kJoined) {
        throw ConfigError("fl client failed to join the overlay");
      }
      set_idle_registry(i, true);
    }
    queue_.schedule(cfg_.overlay.heartbeat_interval_s, [this] { maintenance_tick(); });
    queue_.schedule(cfg_.overlay.stabilize_interval_s, [this] { stabilize_tick(); });
  }

  queue_.schedule(0.0, [this] { start_round(1); });
  while (queue_.run_next()) {
  }
  return result_;
}

void FlSim::start_round(int round) {
  if (round > cfg_.fl.rounds) {
    finished_ = true;
    return;
  }
  round_ = round;
  round_start_ = queue_.now();
  round_open_ = true;
  shards_.clear();
  unassigned_.clear();

  const double upload = cfg_.fl.model_mib / cfg_.fl.upload_bandwidth_mibps;

  std::vector<int> participants;
  for (int i = 0; i < n_clients_; ++i) {
    if (clients_[i].responding) participants.push_back(i);
  }

  double max_compute = 0.0;
  std::map<int, double> computes;
  for (int i : participants) {
    computes[i] = compute_seconds(round, i);
    max_compute = std::max(max_compute, computes[i]);
  }
  result_.round_max_compute.push_back(max_compute);

  // Clients forced offline this round drop mid-round.
  std::vector<std::pair<int, double>> failing;
  auto fail_it = failures_by_round_.find(round);
  if (fail_it != failures_by_round_.end()) failing = fail_it->second;

  if (mode_ == AggregationMode::kCentralSync) {
    // Synchronous aggregation waits for the slowest surviving client.
    double slowest = 0.0;
    for (int i : participants) {
      bool fails = false;
      for (const auto& [c, _] : failing) fails = fails || c == i;
      if (!fails) slowest = std::max(slowest, computes[i]);
    }
    double round_time = slowest + upload + cfg_.fl.aggregation_s;
    for (const auto& [c, rejoin] : failing) {
      double fail_at = round_start_ + cfg_.fl.failure_offset_frac * profile_.median_s;
      queue_.schedule(fail_at, [this, c] { clients_[c].responding = false; });
      if (rejoin > 0) {
        queue_.schedule(fail_at + rejoin, [this, c] { clients_[c].responding = true; });
      }
    }
    double end = round_start_ + round_time;
    result_.round_seconds.push_back(round_time);
    metrics_.add(MetricSample{MetricKind::kRoundTime, round_time, "fedavg_baseline",
                              std::nullopt, round, std::string(), end});
    queue_.schedule(end, [this, round] { start_round(round + 1); });
    return;
  }

  // Pooled mode: shard the round work and let idle peers pull from stragglers.
  const int S = cfg_.fl.shards_per_client;
  for (int i : participants) {
    for (int s = 0; s < S; ++s) {
      Shard shard;
      shard.round = round;
      shard.owner = i;
      shard.index = s;
      shard.duration_s = computes[i] / S;
      shards_.push_back(shard);
    }
  }
  shards_remaining_ = static_cast<int>(shards_.size());

  for (const auto& [c, rejoin] : failing) {
    double fail_at = round_start_ + cfg_.fl.failure_offset_frac * profile_.median_s;
    queue_.schedule(fail_at, [this, c, rejoin] {
      fail_client(c);
      if (rejoin > 0) {
        queue_.schedule(queue_.now() + rejoin, [this, c] {
          clients_[c].rejoin_requested = true;
          clients_[c].rejoin_request_time = queue_.now();
        });
      }
    });
  }

  for (int i : participants) {
    clients_[i].busy = false;
    clients_[i].current_shard = -1;
    int first = -1;
    for (size_t s = 0; s < shards_.size(); ++s) {
      if (shards_[s].owner == i) {
        first = static_cast<int>(s);
        break;
      }
    }
    if (first >= 0) begin_shard(i, first);
  }
  finish_round_if_done();
}

void FlSim::begin_shard(int client_idx, int shard_idx) {
  Client& client = clients_[client_idx];
  Shard& shard = shards_[shard_idx];
  shard.runner = client_idx;
  ++shard.attempt;
  client.busy = true;
  client.current_shard = shard_idx;
  set_idle_registry(client_idx, false);
  int attempt = shard.attempt;
  queue_.schedule(queue_.now() + shard.duration_s, [this, client_idx, shard_idx, attempt] {
    on_shard_complete(client_idx, shard_idx, attempt);
  });
}

void FlSim::on_shard_complete(int client_idx, int shard_idx, int attempt) {
  if (!round_open_) return;
  Client& client = clients_[client_idx];
  Shard& shard = shards_[shard_idx];
  if (!client.responding || shard.attempt != attempt || shard.completed) return;

  shard.completed = true;
  --shards_remaining_;
  std::string key = std::to_string(shard.round) + ":" + std::to_string(shard.owner) +
                    ":" + std::to_string(shard.index);
  ++result_.shard_completions[key];

  client.busy = false;
  client.current_shard = -1;
  set_idle_registry(client_idx, true);

  // Own work first, then pull for stragglers.
  int next_own = -1;
  for (size_t s = 0; s < shards_.size(); ++s) {
    if (shards_[s].owner == client_idx && !shards_[s].completed &&
        shards_[s].runner == -1) {
      next_own = static_cast<int>(s);
      break;
    }
  }
  if (next_own >= 0) {
    begin_shard(client_idx, next_own);
  } else if (mode_ == AggregationMode::kDhtPooled) {
    steal_scan();
  }
  finish_round_if_done();
}

void FlSim::finish_round_if_done() {
  if (!round_open_ || shards_remaining_ > 0) return;
  round_open_ = false;
  double upload = cfg_.fl.model_mib / cfg_.fl.upload_bandwidth_mibps;
  double end = queue_.now() + upload + cfg_.fl.aggregation_s;
  double round_time = end - round_start_;
  result_.round_seconds.push_back(round_time);
  metrics_.add(MetricSample{MetricKind::kRoundTime, round_time, "swiftbot",
                            std::nullopt, round_, std::string(), end});
  int next = round_ + 1;
  queue_.schedule(end, [this, next] { start_round(next); });
}

void FlSim::steal_scan() {
  if (!round_open_) return;
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (int i = 0; i < n_clients_; ++i) {
      Client& c = clients_[i];
      if (!c.responding || c.busy) continue;
      if (!overlay_.is_alive(c.id)) continue;
      if (try_steal_for(i)) progressed = true;
    }
  }
}

bool FlSim::try_steal_for(int) {
  // Victim: dead owners first (their shards cannot complete otherwise), then
  // the straggler with the most unclaimed work.
  std::map<int, int> unclaimed;
  for (const Shard& s : shards_) {
    if (!s.completed && s.runner == -1) ++unclaimed[s.owner];
  }
  int victim = -1;
  bool victim_dead = false;
  int victim_count = 0;
  for (const auto& [owner, count] : unclaimed) {
    bool dead = !clients_[owner].responding;
    bool better = false;
    if (victim == -1) {
      better = true;
    } else if (dead != victim_dead) {
      better = dead;
    } else if (count != victim_count) {
      better = count > victim_count;
    }
    if (better) {
      victim = owner;
      victim_dead = dead;
      victim_count = count;
    }
  }
  if (victim < 0) return false;

  int shard_idx = -1;  // steal from the tail of the victim's queue
  for (int s = static_cast<int>(shards_.size()) - 1; s >= 0; --s) {
    if (shards_[s].owner == victim && !shards_[s].completed && shards_[s].runner == -1) {
      shard_idx = s;
      break;
    }
  }
  if (shard_idx < 0) return false;
  Shard& shard = shards_[shard_idx];

  double transfer_estimate = cfg_.fl.shard_mib / cfg_.default_bandwidth_mibps +
                             cfg_.selector.serialize_overhead_s;
  if (!victim_dead && transfer_estimate >= shard.duration_s) return false;

  double now = queue_.now();
  MigrationRequest req;
  req.reason = victim_dead ? MigrationReason::kFailure : MigrationReason::kRebalance;
  req.current_node = clients_[victim].id;
  std::string shard_name = profile_name_ + ":" + std::to_string(shard.round) + ":" +
                           std::to_string(shard.owner) + ":" +
                           std::to_string(shard.index);
  req.task_key = overlay_.space().reduce(ring_digest32(shard_name));
  req.task_id = shard_name;
  req.num_containers = 1;
  req.image = kTrainerImage;

  metrics_.add(MigrationAudit{now, "request", shard_name, req.current_node, "",
                              to_string(req.reason), "swiftbot"});
  auto route = overlay_.lookup(req.task_key);
  metrics_.add(MigrationAudit{now, "fetch", shard_name, req.current_node,
                              route ? route->owner : "", to_string(req.reason),
                              "swiftbot"});

  auto has_capacity = [this](const NodeId& n) {
    for (const Client& c : clients_) {
      if (c.id == n) return c.responding && !c.busy;
    }
    return false;
  };
  TargetChoice choice = request_migration(req, overlay_, cfg_.selector.k,
                                          cfg_.scheduler, {}, links_, has_capacity);
  if (choice.status == TargetChoice::kDeferred) {
    metrics_.add(MigrationAudit{now, "defer", shard_name, req.current_node, "",
                                to_string(req.reason), "swiftbot"});
    return false;
  }
  metrics_.add(MigrationAudit{now, "find", shard_name, req.current_node,
                              choice.target, to_string(req.reason), "swiftbot"});

  Checkpoint cp;
  cp.task_key = req.task_key;
  for (const Shard& s : shards_) {
    if (s.owner == victim && s.completed) {
      cp.completed_subtasks.insert(std::to_string(s.index));
    }
  }
  cp.partial_results_mib = cfg_.fl.shard_mib;
  cp.taken_at = now;

  CommitResult commit = commit_migration(req, choice.target, cp, nullptr, overlay_,
                                         links_, cfg_.selector.serialize_overhead_s);
  if (commit.status != CommitResult::kCommitted) {
    ++result_.steal_conflicts;
    metrics_.add(MigrationAudit{now, "abort", shard_name, req.current_node,
                                choice.target, to_string(req.reason), "swiftbot"});
    return false;
  }
  metrics_.add(MigrationAudit{now, "commit", shard_name, req.current_node,
                              choice.target, to_string(req.reason), "swiftbot"});
  metrics_.add(MetricSample{MetricKind::kMigrationCount, 1.0, "swiftbot",
                            std::nullopt, round_, choice.target, now});
  ++result_.steals;

  int target_idx = -1;
  for (int i = 0; i < n_clients_; ++i) {
    if (clients_[i].id == choice.target) target_idx = i;
  }
  Client& target = clients_[target_idx];
  target.busy = true;  // reserved through the transfer
  set_idle_registry(target_idx, false);
  shard.runner = target_idx;
  ++shard.attempt;
  int attempt = shard.attempt;
  queue_.schedule(now + commit.transfer_s, [this, target_idx, shard_idx, attempt] {
    if (!round_open_) return;
    Shard& s = shards_[shard_idx];
    Client& t = clients_[target_idx];
    if (s.attempt != attempt || s.completed || !t.responding) return;
    t.current_shard = shard_idx;
    queue_.schedule(queue_.now() + s.duration_s, [this, target_idx, shard_idx, attempt] {
      on_shard_complete(target_idx, shard_idx, attempt);
    });
  });
  return true;
}

void FlSim::fail_client(int idx) {
  Client& client = clients_[idx];
  if (!client.responding) return;
  client.responding = false;
  overlay_.crash(client.id);
  // Detection happens via missed heartbeats; shards unclaim there.
}

void FlSim::maintenance_tick() {
  double now = queue_.now();
  for (const Client& c : clients_) {
    if (c.responding && overlay_.is_alive(c.id)) {
      overlay_.record_heartbeat(c.id, now);
    }
  }
  std::vector<NodeId> dead = overlay_.detect_failures(now);
  if (!dead.empty() && round_open_) {
    for (const NodeId& addr : dead) {
      for (int i = 0; i < n_clients_; ++i) {
        if (clients_[i].id != addr) continue;
        // Unclaim everything the dead client was running or still owned.
        for (Shard& s : shards_) {
          if (!s.completed && s.runner == i) {
            s.runner = -1;
            ++s.attempt;
          }
        }
        clients_[i].busy = false;
        clients_[i].current_shard = -1;
      }
    }
    steal_scan();
  }
  if (!finished_) {
    queue_.schedule(now + cfg_.overlay.heartbeat_interval_s, [this] { maintenance_tick(); });
  }
}

void FlSim::stabilize_tick() {
  double now = queue_.now();
  overlay_.stabilize(now);
  for (int i = 0; i < n_clients_; ++i) {
    Client& c = clients_[i];
    if (!c.rejoin_requested) continue;
    std::optional<NodeId> bootstrap;
    for (const Client& other : clients_) {
      if (other.id != c.id && other.responding && overlay_.is_alive(other.id)) {
        bootstrap = other.id;
        break;
      }
    }
    if (overlay_.join(c.id, bootstrap, now) == JoinStatus::kJoined) {
      c.rejoin_requested = false;
      c.responding = true;
      c.busy = false;
      c.current_shard = -1;
      set_idle_registry(i, true);
      double reintegration = now - c.rejoin_request_time;
      result_.reintegration_s.push_back(reintegration);
      metrics_.add(MetricSample{MetricKind::kRecoveryTime, reintegration, "swiftbot",
                                std::nullopt, round_, c.id, now});
      steal_scan();
    }
  }
  if (!finished_) {
    queue_.schedule(now + cfg_.overlay.stabilize_interval_s, [this] { stabilize_tick(); });
  }
}

}  // namespace swiftbot
