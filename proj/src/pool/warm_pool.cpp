// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/pool/warm_pool.hpp"

#include <algorithm>
#include <cmath>

#include "swiftbot/common/errors.hpp"

namespace swiftbot {

namespace {
constexpr double kStateGrowthPerUseMib = 0.25;
constexpr double kStateGrowthCapMib = 4.0;
}  // namespace

const char* to_string(ContainerStatus s) {
  switch (s) {
    case ContainerStatus::kWarming: return "warming";
    case ContainerStatus::kReady: return "ready";
    case ContainerStatus::kInUse: return "in_use";
    case ContainerStatus::kDegraded: return "degraded";
    case ContainerStatus::kEvicted: return "evicted";
  }
  return "?";
}

WarmPool::WarmPool(std::string node, PoolConfig cfg, const Calibration& cal)
    : node_(std::move(node)), cfg_(cfg), cal_(cal) {
  if (cfg_.capacity < 1) throw ConfigError("pool capacity must be >= 1");
  if (cfg_.ttl_s <= 0) throw ConfigError("pool ttl must be > 0");
}

std::string WarmPool::next_id() {
  return node_ + "/c" + std::to_string(seq_++);
}

void WarmPool::transition(ContainerRecord& rec, ContainerStatus to, double now,
                          const char* kind) {
  static const auto legal = [](ContainerStatus from, ContainerStatus to) {
    switch (from) {
      case ContainerStatus::kWarming:
        return to == ContainerStatus::kReady;
      case ContainerStatus::kReady:
        return to == ContainerStatus::kInUse || to == ContainerStatus::kDegraded ||
               to == ContainerStatus::kEvicted;
      case ContainerStatus::kInUse:
        return to == ContainerStatus::kReady;
      case ContainerStatus::kDegraded:
        return to == ContainerStatus::kEvicted;
      case ContainerStatus::kEvicted:
        return false;
    }
    return false;
  };
  if (!legal(rec.status, to)) {
    throw InvariantViolation("container_lifecycle",
                             rec.container_id + ": illegal transition " +
                                 std::string(to_string(rec.status)) + " -> " +
                                 to_string(to));
  }
  events_.push_back(PoolEvent{now, kind, rec.container_id, rec.image, rec.status});
  rec.status = to;
}

double WarmPool::effective_init(const std::string& image, bool stateful) const {
  if (stateful && preserved_state_.count(image)) return cal_.resume_cost(image);
  return cal_.cold_cost(image);
}

AdmitResult WarmPool::admit_warm(const std::string& image, double cpu,
                                 double mem_mib, const std::set<std::string>& volumes,
                                 bool stateful, double now,
                                 std::optional<double> init_override_s) {
  AdmitResult result;
  refresh(now);
  if (occupancy() >= cfg_.capacity) {
    auto victims = evict_candidates(occupancy() - cfg_.capacity + 1, now);
    if (static_cast<int>(victims.size()) < occupancy() - cfg_.capacity + 1) {
      result.reject_reason = "capacity";
      return result;
    }
    for (const auto& id : victims) {
      evict(id, now);
      result.evicted.push_back(id);
    }
  }

  ContainerRecord rec;
  rec.container_id = next_id();
  rec.image = image;
  rec.cpu = cpu;
  rec.mem_mib = mem_mib;
  rec.volumes = volumes;
  rec.status = ContainerStatus::kWarming;
  rec.init_cost_s = cal_.cold_cost(image);
  rec.stateful = stateful;
  rec.last_access = now;
  double init = init_override_s ? *init_override_s : effective_init(image, stateful);
  if (stateful) {
    auto it = preserved_state_.find(image);
    rec.state_size_mib = it != preserved_state_.end() ? it->second
                                                      : cal_.at(image).state_mib;
  } else {
    rec.state_size_mib = cal_.at(image).state_mib;
  }
  rec.ready_at = now + init;

  result.admitted = true;
  result.container_id = rec.container_id;
  result.ready_at = rec.ready_at;
  events_.push_back(PoolEvent{now, "admit", rec.container_id, image, rec.status});
  records_.emplace(rec.container_id, std::move(rec));

  if (occupancy() > cfg_.capacity) {
    throw InvariantViolation("pool_occupancy", node_ + ": occupancy exceeds capacity");
  }
  return result;
}

AdmitResult WarmPool::admit_migrated(const ContainerRecord& record, double now,
                                     double ready_at) {
  AdmitResult result;
  refresh(now);
  if (occupancy() >= cfg_.capacity) {
    auto victims = evict_candidates(occupancy() - cfg_.capacity + 1, now);
    if (static_cast<int>(victims.size()) < occupancy() - cfg_.capacity + 1) {
      result.reject_reason = "capacity";
      return result;
    }
    for (const auto& id : victims) {
      evict(id, now);
      result.evicted.push_back(id);
    }
  }
  ContainerRecord rec = record;
  rec.status = ContainerStatus::kWarming;
  rec.ready_at = ready_at;
  rec.last_access = now;
  result.admitted = true;
  result.container_id = rec.container_id;
  result.ready_at = ready_at;
  events_.push_back(PoolEvent{now, "admit", rec.container_id, rec.image, rec.status});
  records_[rec.container_id] = std::move(rec);
  return result;
}

std::vector<std::string> WarmPool::evict_candidates(int needed, double now) const {
  (void)now;
  struct Candidate {
    const ContainerRecord* rec;
    double score;
  };
  std::vector<const ContainerRecord*> ready;
  for (const auto& [id, rec] : records_) {
    if (rec.status == ContainerStatus::kReady) ready.push_back(&rec);
  }
  if (ready.empty() || needed < 1) return {};

  auto minmax = [&](auto field) {
    double lo = 1e300, hi = -1e300;
    for (const auto* r : ready) {
      double v = field(*r);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return std::pair{lo, hi};
  };
  auto norm = [](double v, std::pair<double, double> range) {
    if (range.second <= range.first) return 0.0;
    return (v - range.first) / (range.second - range.first);
  };
  auto freq_range = minmax([](const ContainerRecord& r) { return double(r.access_count); });
  auto init_range = minmax([](const ContainerRecord& r) { return r.init_cost_s; });
  auto mem_range = minmax([](const ContainerRecord& r) { return r.mem_mib; });

  std::vector<Candidate> candidates;
  candidates.reserve(ready.size());
  for (const auto* r : ready) {
    double rs = 0.4 * norm(r->access_count, freq_range) +
                0.4 * norm(r->init_cost_s, init_range) -
                0.2 * norm(r->mem_mib, mem_range);
    candidates.push_back({r, rs});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.rec->last_access != b.rec->last_access) {
      return a.rec->last_access < b.rec->last_access;  // oldest first
    }
    return a.rec->container_id < b.rec->container_id;
  });

  std::vector<std::string> out;
  for (const auto& c : candidates) {
    if (static_cast<int>(out.size()) >= needed) break;
    out.push_back(c.rec->container_id);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> WarmPool::probe_health(double now) {
  std::vector<std::pair<std::string, std::string>> degraded;
  for (auto& [id, rec] : records_) {
    if (rec.status == ContainerStatus::kReady && degradation_flags_.count(id)) {
      transition(rec, ContainerStatus::kDegraded, now, "degrade");
      degraded.emplace_back(id, rec.image);
    }
  }
  for (const auto& [id, _] : degraded) degradation_flags_.erase(id);
  last_probe_ = now;
  return degraded;
}

void WarmPool::inject_degradation(const std::string& container_id) {
  degradation_flags_.insert(container_id);
}

void WarmPool::note_arrival(const std::string& image) {
  ++arrivals_since_tick_[image];
}

std::vector<std::string> WarmPool::refresh(double now) {
  std::vector<std::string> promoted;
  for (auto& [id, rec] : records_) {
    if (rec.status == ContainerStatus::kWarming && rec.ready_at <= now) {
      transition(rec, ContainerStatus::kReady, now, "ready");
      promoted.push_back(id);
    }
  }
  return promoted;
}

MaintenanceReport WarmPool::maintenance_tick(double now, double dt) {
  MaintenanceReport report;
  report.promoted = refresh(now);

  // Arrival-rate EWMA over this tick's counts.
  if (dt > 0) {
    std::set<std::string> images;
    for (const auto& [image, _] : rate_ewma_) images.insert(image);
    for (const auto& [image, _] : arrivals_since_tick_) images.insert(image);
    for (const auto& image : images) {
      double observed = arrivals_since_tick_.count(image)
                            ? arrivals_since_tick_[image] / dt
                            : 0.0;
      double& rate = rate_ewma_[image];
      rate = cfg_.arrival_alpha * observed + (1.0 - cfg_.arrival_alpha) * rate;
    }
    arrivals_since_tick_.clear();
  }

  // TTL expiry for idle ready records.
  std::vector<std::string> expired;
  for (const auto& [id, rec] : records_) {
    if (rec.status == ContainerStatus::kReady && now - rec.last_access > cfg_.ttl_s) {
      expired.push_back(id);
    }
  }
  for (const auto& id : expired) {
    evict(id, now);
    report.ttl_evicted.push_back(id);
  }

  // Drop previously degraded records, then probe for fresh degradations.
  std::vector<std::string> drop;
  for (const auto& [id, rec] : records_) {
    if (rec.status == ContainerStatus::kDegraded) drop.push_back(id);
  }
  for (const auto& id : drop) evict(id, now);

  if (now - last_probe_ >= cfg_.probe_interval_s) {
    report.degraded = probe_health(now);
  }
  return report;
}

bool WarmPool::mark_in_use(const std::string& container_id, double now) {
  auto it = records_.find(container_id);
  if (it == records_.end() || it->second.status != ContainerStatus::kReady) {
    return false;
  }
  transition(it->second, ContainerStatus::kInUse, now, "in_use");
  return true;
}

bool WarmPool::release(const std::string& container_id, double now) {
  auto it = records_.find(container_id);
  if (it == records_.end() || it->second.status != ContainerStatus::kInUse) {
    return false;
  }
  ContainerRecord& rec = it->second;
  transition(rec, ContainerStatus::kReady, now, "release");
  rec.last_access = now;
  ++rec.access_count;
  double cap = cal_.has(rec.image) ? cal_.at(rec.image).state_mib + kStateGrowthCapMib
                                   : rec.state_size_mib;
  rec.state_size_mib = std::min(rec.state_size_mib + kStateGrowthPerUseMib, cap);
  return true;
}

bool WarmPool::evict(const std::string& container_id, double now) {
  auto it = records_.find(container_id);
  if (it == records_.end()) return false;
  ContainerRecord& rec = it->second;
  if (rec.status == ContainerStatus::kInUse) {
    throw InvariantViolation("no_in_use_eviction",
                             node_ + ": attempted to evict in_use " + container_id);
  }
  if (rec.status == ContainerStatus::kWarming) {
    // Cancelled before it ever became ready; no transition event needed
    // beyond the evict record itself.
    events_.push_back(PoolEvent{now, "evict", rec.container_id, rec.image, rec.status});
  } else {
    transition(rec, ContainerStatus::kEvicted, now, "evict");
  }
  if (rec.stateful) preserved_state_[rec.image] = rec.state_size_mib;
  records_.erase(it);
  return true;
}

std::optional<ContainerRecord> WarmPool::extract(const std::string& container_id,
                                                 double now) {
  auto it = records_.find(container_id);
  if (it == records_.end()) return std::nullopt;
  ContainerRecord rec = it->second;
  events_.push_back(PoolEvent{now, "evict", rec.container_id, rec.image, rec.status});
  records_.erase(it);
  return rec;
}

std::vector<std::pair<std::string, int>> WarmPool::prewarm_plan(double now) const {
  (void)now;
  double total_rate = 0.0;
  for (const auto& [image, rate] : rate_ewma_) total_rate += std::max(rate, 0.0);
  if (total_rate <= 0.0) return {};

  // Highest-demand images first so the free-slot clamp cuts the tail.
  std::vector<std::pair<std::string, double>> by_rate(rate_ewma_.begin(),
                                                      rate_ewma_.end());
  std::sort(by_rate.begin(), by_rate.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  int free_slots = slots_free();
  std::vector<std::pair<std::string, int>> plan;
  for (const auto& [image, rate] : by_rate) {
    if (rate <= 0.0 || free_slots <= 0) continue;
    int target = static_cast<int>(std::ceil(rate * cfg_.prewarm_horizon_s));
    int share = std::max(1, static_cast<int>(cfg_.capacity * rate / total_rate));
    target = std::min(target, share);
    int have = ready_or_warming(image);
    int want = std::max(0, target - have);
    want = std::min(want, free_slots);
    if (want > 0) {
      plan.emplace_back(image, want);
      free_slots -= want;
    }
  }
  return plan;
}

const ContainerRecord* WarmPool::find(const std::string& container_id) const {
  auto it = records_.find(container_id);
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<const ContainerRecord*> WarmPool::records() const {
  std::vector<const ContainerRecord*> out;
  out.reserve(records_.size());
  for (const auto& [id, rec] : records_) out.push_back(&rec);
  return out;
}

std::vector<const ContainerRecord*> WarmPool::ready_records() const {
  std::vector<const ContainerRecord*> out;
  for (const auto& [id, rec] : records_) {
    if (rec.status == ContainerStatus::kReady) out.push_back(&rec);
  }
  return out;
}

int WarmPool::occupancy() const { return static_cast<int>(records_.size()); }

int WarmPool::slots_free() const { return cfg_.capacity - occupancy(); }

int WarmPool::count(ContainerStatus status) const {
  int n = 0;
  for (const auto& [id, rec] : records_) n += rec.status == status ? 1 : 0;
  return n;
}

int WarmPool::warm_count(const std::string& image) const {
  int n = 0;
  for (const auto& [id, rec] : records_) {
    if (rec.status == ContainerStatus::kReady && rec.image == image) ++n;
  }
  return n;
}

int WarmPool::ready_or_warming(const std::string& image) const {
  int n = 0;
  for (const auto& [id, rec] : records_) {
    if (rec.image != image) continue;
    if (rec.status == ContainerStatus::kReady || rec.status == ContainerStatus::kWarming) {
      ++n;
    }
  }
  return n;
}

double WarmPool::arrival_rate(const std::string& image) const {
  auto it = rate_ewma_.find(image);
  return it == rate_ewma_.end() ? 0.0 : it->second;
}

void WarmPool::set_arrival_rate(const std::string& image, double rate) {
  rate_ewma_[image] = rate;
}

}  // namespace swiftbot
