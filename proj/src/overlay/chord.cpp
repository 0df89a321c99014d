// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/overlay/chord.hpp"

#include <algorithm>
#include <cassert>

#include <nlohmann/json.hpp>

#include "swiftbot/common/digest.hpp"
#include "swiftbot/common/errors.hpp"

namespace swiftbot {

const char* to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::kPending: return "pending";
    case TaskStatus::kInProgress: return "in_progress";
    case TaskStatus::kMigrating: return "migrating";
    case TaskStatus::kDone: return "done";
    case TaskStatus::kFailed: return "failed";
  }
  return "?";
}

ChordOverlay::ChordOverlay(OverlayConfig cfg) : cfg_(cfg), space_(cfg.id_bits) {
  if (cfg_.successor_count < 1) throw ConfigError("successor_count must be >= 1");
}

ChordOverlay::NodeState* ChordOverlay::find(const NodeId& address) {
  auto it = by_address_.find(address);
  if (it == by_address_.end()) return nullptr;
  return &nodes_.at(it->second);
}

const ChordOverlay::NodeState* ChordOverlay::find(const NodeId& address) const {
  auto it = by_address_.find(address);
  if (it == by_address_.end()) return nullptr;
  return &nodes_.at(it->second);
}

std::vector<uint32_t> ChordOverlay::alive_positions() const {
  std::vector<uint32_t> out;
  out.reserve(nodes_.size());
  for (const auto& [pos, node] : nodes_) {
    if (node.alive) out.push_back(pos);
  }
  return out;  // nodes_ is position-ordered already
}

uint32_t ChordOverlay::owner_position(uint32_t key,
                                      const std::vector<uint32_t>& alive) const {
  assert(!alive.empty());
  auto it = std::lower_bound(alive.begin(), alive.end(), key);
  if (it == alive.end()) it = alive.begin();  // wrap around
  return *it;
}

// -- membership --------------------------------------------------------------

JoinStatus ChordOverlay::join(const NodeId& address,
                              const std::optional<NodeId>& bootstrap, double now) {
  return join_impl(space_.reduce(ring_digest32(address)), address, bootstrap, now);
}

JoinStatus ChordOverlay::join_at(uint32_t position, const NodeId& address,
                                 const std::optional<NodeId>& bootstrap, double now) {
  return join_impl(space_.reduce(position), address, bootstrap, now);
}

JoinStatus ChordOverlay::join_impl(uint32_t position, const NodeId& address,
                                   const std::optional<NodeId>& bootstrap,
                                   double now) {
  size_t live = live_count();
  if (live > 0) {
    if (!bootstrap) return JoinStatus::kBootstrapUnreachable;
    const NodeState* b = find(*bootstrap);
    if (!b || !b->alive || !b->responding) return JoinStatus::kBootstrapUnreachable;
  }

  if (NodeState* existing = find(address)) {
    if (existing->alive) return JoinStatus::kDuplicateId;
    // Rejoin after a crash: fresh local state, the ring restores replicas.
    existing->alive = true;
    existing->responding = true;
    existing->last_heartbeat = now;
    existing->store.clear();
    existing->registry = NodeRegistry{};
    stabilize(now);
    return JoinStatus::kJoined;
  }

  auto slot = nodes_.find(position);
  if (slot != nodes_.end()) return JoinStatus::kDuplicateId;  // digest collision

  NodeState node;
  node.position = position;
  node.address = address;
  node.last_heartbeat = now;
  nodes_.emplace(position, std::move(node));
  by_address_[address] = position;
  stabilize(now);
  return JoinStatus::kJoined;
}

void ChordOverlay::leave(const NodeId& address, double now) {
  NodeState* node = find(address);
  if (!node || !node->alive) return;
  node->alive = false;
  node->responding = false;
  std::map<uint32_t, VersionedTaskEntry> store;
  store.swap(node->store);
  if (live_count() > 0) {
    // Graceful departure hands entries off before the node goes away.
    for (const auto& [key, entry] : store) commit_to_replicas(entry);
  }
  stabilize(now);
}

void ChordOverlay::crash(const NodeId& address) {
  if (NodeState* node = find(address)) node->responding = false;
}

void ChordOverlay::record_heartbeat(const NodeId& address, double now) {
  NodeState* node = find(address);
  if (node && node->responding) node->last_heartbeat = now;
}

std::vector<NodeId> ChordOverlay::detect_failures(double now) {
  const double timeout = cfg_.heartbeat_interval_s * cfg_.heartbeat_timeout_beats;
  std::vector<NodeId> dead;
  for (auto& [pos, node] : nodes_) {
    if (!node.alive) continue;
    if (now - node.last_heartbeat > timeout) {
      node.alive = false;
      node.responding = false;
      dead.push_back(node.address);
    }
  }
  return dead;
}

void ChordOverlay::stabilize(double) {
  std::vector<uint32_t> alive = alive_positions();
  const size_t n = alive.size();
  if (n == 0) return;

  for (size_t i = 0; i < n; ++i) {
    NodeState& node = nodes_.at(alive[i]);
    node.predecessor = alive[(i + n - 1) % n];
    node.successors.clear();
    size_t count = std::min<size_t>(cfg_.successor_count, n);
    for (size_t j = 1; j <= count; ++j) {
      node.successors.push_back(alive[(i + j) % n]);
    }
    node.fingers.assign(space_.bits(), 0);
    for (unsigned b = 0; b < space_.bits(); ++b) {
      node.fingers[b] = owner_position(space_.add(node.position, 1ull << b), alive);
    }
  }

  place_entries();
}

void ChordOverlay::place_entries() {
  std::vector<uint32_t> alive = alive_positions();
  if (alive.empty()) return;

  // Fold every surviving copy into one authoritative entry per key.
  std::map<uint32_t, VersionedTaskEntry> authoritative;
  for (uint32_t pos : alive) {
    for (const auto& [key, entry] : nodes_.at(pos).store) {
      auto it = authoritative.find(key);
      if (it == authoritative.end()) {
        authoritative.emplace(key, entry);
        continue;
      }
      VersionedTaskEntry& cur = it->second;
      switch (entry.version.compare(cur.version)) {
        case VectorOrder::kDominates:
          cur = entry;
          break;
        case VectorOrder::kConcurrent: {
          VersionVector merged = cur.version;
          merged.merge(entry.version);
          cur = resolve_concurrent(cur, entry);
          cur.version = merged;
          break;
        }
        case VectorOrder::kDominated:
        case VectorOrder::kEqual:
          break;
      }
    }
  }

  const size_t replicas = std::min<size_t>(cfg_.successor_count, alive.size());
  for (const auto& [key, entry] : authoritative) {
    auto it = std::lower_bound(alive.begin(), alive.end(), key);
    std::vector<uint32_t> holders;
    for (size_t j = 0; j < replicas; ++j) {
      if (it == alive.end()) it = alive.begin();
      holders.push_back(*it);
      ++it;
    }
    for (uint32_t pos : alive) {
      NodeState& node = nodes_.at(pos);
      bool should_hold =
          std::find(holders.begin(), holders.end(), pos) != holders.end();
      if (should_hold) {
        node.store[key] = entry;
      } else {
        node.store.erase(key);
      }
    }
  }
}

// -- routing ------------------------------------------------------------------

uint32_t ChordOverlay::position_of(const NodeId& address) const {
  const NodeState* node = find(address);
  if (!node) throw ConfigError("unknown overlay node: " + address);
  return node->position;
}

std::optional<NodeId> ChordOverlay::address_at(uint32_t position) const {
  auto it = nodes_.find(position);
  if (it == nodes_.end()) return std::nullopt;
  return it->second.address;
}

bool ChordOverlay::is_alive(const NodeId& address) const {
  const NodeState* node = find(address);
  return node && node->alive;
}

bool ChordOverlay::is_responding(const NodeId& address) const {
  const NodeState* node = find(address);
  return node && node->responding;
}

size_t ChordOverlay::live_count() const {
  size_t n = 0;
  for (const auto& [pos, node] : nodes_) n += node.alive ? 1 : 0;
  return n;
}

std::vector<NodeId> ChordOverlay::live_nodes() const {
  std::vector<NodeId> out;
  for (const auto& [pos, node] : nodes_) {
    if (node.alive) out.push_back(node.address);
  }
  return out;
}

std::optional<NodeId> ChordOverlay::owner_of(uint32_t key) const {
  std::vector<uint32_t> alive = alive_positions();
  if (alive.empty()) return std::nullopt;
  return nodes_.at(owner_position(key, alive)).address;
}

uint32_t ChordOverlay::closest_preceding(const NodeState& n, uint32_t key) const {
  uint32_t best = n.position;
  uint32_t best_progress = 0;
  auto consider = [&](uint32_t pos) {
    auto it = nodes_.find(pos);
    if (it == nodes_.end() || !it->second.alive) return;
    if (!space_.in_open_open(pos, n.position, key)) return;
    uint32_t progress = space_.distance(n.position, pos);
    if (progress > best_progress) {
      best_progress = progress;
      best = pos;
    }
  };
  for (auto it = n.fingers.rbegin(); it != n.fingers.rend(); ++it) consider(*it);
  for (uint32_t pos : n.successors) consider(pos);
  return best;
}

std::optional<LookupResult> ChordOverlay::lookup(uint32_t key) const {
  std::vector<uint32_t> alive = alive_positions();
  if (alive.empty()) return std::nullopt;
  return lookup_from(nodes_.at(alive.front()).address, key);
}

std::optional<LookupResult> ChordOverlay::lookup_from(const NodeId& start,
                                                      uint32_t key) const {
  const NodeState* n = find(start);
  if (!n || !n->alive) {
    std::vector<uint32_t> alive = alive_positions();
    if (alive.empty()) return std::nullopt;
    n = &nodes_.at(alive.front());
  }

  int hops = 0;
  const int hop_limit = static_cast<int>(space_.bits()) * 2 + 8;
  while (true) {
    if (space_.in_open_closed(key, n->predecessor, n->position)) {
      return LookupResult{n->address, hops};  // n owns the key
    }
    uint32_t succ = n->successors.empty() ? n->position : n->successors.front();
    if (space_.in_open_closed(key, n->position, succ)) {
      return LookupResult{nodes_.at(succ).address, hops + 1};
    }
    uint32_t next = closest_preceding(*n, key);
    if (next == n->position) next = succ;  // no finger precedes: step forward
    n = &nodes_.at(next);
    ++hops;
    if (hops > hop_limit) {
      throw InvariantViolation("lookup_termination",
                               "routing exceeded " + std::to_string(hop_limit) +
                                   " hops; ring not stabilized?");
    }
  }
}

std::vector<NodeId> ChordOverlay::successors_of_key(uint32_t key, int k) const {
  std::vector<NodeId> out;
  if (k < 1) return out;
  std::vector<uint32_t> alive = alive_positions();
  if (alive.empty()) return out;
  auto it = std::lower_bound(alive.begin(), alive.end(), key);
  size_t count = std::min<size_t>(k, alive.size());
  for (size_t j = 0; j < count; ++j) {
    if (it == alive.end()) it = alive.begin();
    out.push_back(nodes_.at(*it).address);
    ++it;
  }
  return out;
}

const std::vector<uint32_t>& ChordOverlay::successor_list(const NodeId& address) const {
  const NodeState* node = find(address);
  if (!node) throw ConfigError("unknown overlay node: " + address);
  return node->successors;
}

const std::vector<uint32_t>& ChordOverlay::finger_table(const NodeId& address) const {
  const NodeState* node = find(address);
  if (!node) throw ConfigError("unknown overlay node: " + address);
  return node->fingers;
}

// -- replicated entries --------------------------------------------------------

const VersionedTaskEntry& ChordOverlay::resolve_concurrent(
    const VersionedTaskEntry& a, const VersionedTaskEntry& b) {
  if (a.availability_score != b.availability_score) {
    return a.availability_score > b.availability_score ? a : b;
  }
  if (a.load_score != b.load_score) return a.load_score < b.load_score ? a : b;
  if (a.assigned_node != b.assigned_node) {
    return a.assigned_node < b.assigned_node ? a : b;
  }
  if (a.status != b.status) return static_cast<int>(a.status) < static_cast<int>(b.status) ? a : b;
  if (a.containers_allocated != b.containers_allocated) {
    return a.containers_allocated < b.containers_allocated ? a : b;
  }
  return a;  // payloads identical
}

PutResult ChordOverlay::put_entry(const VersionedTaskEntry& entry) {
  std::vector<uint32_t> alive = alive_positions();
  if (alive.empty()) return PutResult{PutStatus::kUnreachable, entry};

  // Coordinator = first responding live node clockwise from the key.
  NodeState* coord = nullptr;
  auto it = std::lower_bound(alive.begin(), alive.end(), entry.task_key);
  for (size_t probes = 0; probes < alive.size(); ++probes) {
    if (it == alive.end()) it = alive.begin();
    NodeState& cand = nodes_.at(*it);
    if (cand.responding) {
      coord = &cand;
      break;
    }
    ++it;
  }
  if (!coord) return PutResult{PutStatus::kUnreachable, entry};

  auto stored_it = coord->store.find(entry.task_key);
  if (stored_it == coord->store.end()) {
    commit_to_replicas(entry);
    return PutResult{PutStatus::kCommitted, entry};
  }

  VersionedTaskEntry stored = stored_it->second;
  switch (entry.version.compare(stored.version)) {
    case VectorOrder::kDominates: {
      commit_to_replicas(entry);
      return PutResult{PutStatus::kCommitted, entry};
    }
    case VectorOrder::kDominated:
    case VectorOrder::kEqual:
      return PutResult{PutStatus::kStale, stored};
    case VectorOrder::kConcurrent: {
      VersionVector merged = stored.version;
      merged.merge(entry.version);
      const VersionedTaskEntry& winner = resolve_concurrent(stored, entry);
      VersionedTaskEntry committed = winner;
      committed.version = merged;
      bool incoming_won = winner.same_payload(entry) && !winner.same_payload(stored);
      commit_to_replicas(committed);
      return PutResult{incoming_won ? PutStatus::kResolvedWin : PutStatus::kResolvedLoss,
                       committed};
    }
  }
  return PutResult{PutStatus::kUnreachable, entry};
}

void ChordOverlay::commit_to_replicas(const VersionedTaskEntry& committed) {
  std::vector<uint32_t> alive = alive_positions();
  const size_t replicas = std::min<size_t>(cfg_.successor_count, alive.size());
  auto it = std::lower_bound(alive.begin(), alive.end(), committed.task_key);
  for (size_t j = 0; j < replicas; ++j) {
    if (it == alive.end()) it = alive.begin();
    NodeState& node = nodes_.at(*it);
    ++it;
    if (!node.responding) continue;  // repaired at the next stabilization round
    auto existing = node.store.find(committed.task_key);
    if (existing != node.store.end()) {
      VectorOrder order = committed.version.compare(existing->second.version);
      if (order == VectorOrder::kDominated || order == VectorOrder::kEqual) continue;
      if (order == VectorOrder::kConcurrent) {
        // Divergent replica: fold instead of overwriting so no version
        // component ever decreases.
        VersionVector merged = existing->second.version;
        merged.merge(committed.version);
        VersionedTaskEntry folded = resolve_concurrent(existing->second, committed);
        folded.version = merged;
        node.store[committed.task_key] = folded;
        continue;
      }
    }
    node.store[committed.task_key] = committed;
  }
}

std::optional<VersionedTaskEntry> ChordOverlay::get_entry(uint32_t key) const {
  std::vector<uint32_t> alive = alive_positions();
  if (alive.empty()) return std::nullopt;
  auto it = std::lower_bound(alive.begin(), alive.end(), key);
  // Probe the replica chain; one extra in case the owner just changed.
  size_t probes = std::min<size_t>(cfg_.successor_count + 1, alive.size());
  for (size_t j = 0; j < probes; ++j) {
    if (it == alive.end()) it = alive.begin();
    const NodeState& node = nodes_.at(*it);
    ++it;
    if (!node.responding) continue;
    auto found = node.store.find(key);
    if (found != node.store.end()) return found->second;
  }
  return std::nullopt;
}

std::vector<uint32_t> ChordOverlay::stored_keys(const NodeId& address) const {
  const NodeState* node = find(address);
  if (!node) throw ConfigError("unknown overlay node: " + address);
  std::vector<uint32_t> keys;
  keys.reserve(node->store.size());
  for (const auto& [key, _] : node->store) keys.push_back(key);
  return keys;
}

std::vector<NodeId> ChordOverlay::replica_nodes(uint32_t key) const {
  std::vector<NodeId> out;
  for (const auto& [pos, node] : nodes_) {
    if (node.alive && node.store.count(key)) out.push_back(node.address);
  }
  return out;
}

// -- registry & export -----------------------------------------------------------

NodeRegistry& ChordOverlay::registry(const NodeId& address) {
  NodeState* node = find(address);
  if (!node) throw ConfigError("unknown overlay node: " + address);
  return node->registry;
}

const NodeRegistry& ChordOverlay::registry(const NodeId& address) const {
  const NodeState* node = find(address);
  if (!node) throw ConfigError("unknown overlay node: " + address);
  return node->registry;
}

void ChordOverlay::export_ring(std::ostream& out) const {
  for (const auto& [pos, node] : nodes_) {
    nlohmann::json succ = nlohmann::json::array();
    for (uint32_t s : node.successors) succ.push_back(nodes_.at(s).address);
    out << "{\"id\":" << nlohmann::json(node.address).dump()
        << ",\"position\":" << node.position << ",\"successors\":" << succ.dump()
        << ",\"alive\":" << (node.alive ? "true" : "false") << "}\n";
  }
}

}  // namespace swiftbot
