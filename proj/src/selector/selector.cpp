// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/selector/selector.hpp"

#include <algorithm>

#include "swiftbot/common/digest.hpp"

namespace swiftbot {

const char* to_string(AllocationKind k) {
  switch (k) {
    case AllocationKind::kLocalWarm: return "local_warm";
    case AllocationKind::kMigratedWarm: return "migrated_warm";
    case AllocationKind::kColdStart: return "cold_start";
  }
  return "?";
}

double image_match_term(const ContainerRecord& c, const Subtask& t) {
  if (c.image == t.image) return 1.0;
  if (t.hint.compatible_images.count(c.image)) return 0.5;
  return 0.0;
}

double score(const ContainerRecord& c, const Subtask& t, const ScoreWeights& w) {
  double s_img = image_match_term(c, t);
  double s_res = std::min(1.0, std::min(c.cpu / t.cpu, c.mem_mib / t.mem_mib));
  double s_vol = 1.0;
  if (!t.volumes.empty()) {
    size_t overlap = 0;
    for (const auto& v : t.volumes) overlap += c.volumes.count(v);
    s_vol = static_cast<double>(overlap) / t.volumes.size();
  }
  return w.image * s_img + w.resources * s_res + w.volumes * s_vol;
}

int compat(const ContainerRecord& c, const Subtask& t) {
  if (image_match_term(c, t) == 0.0) return 0;
  return (c.cpu >= t.cpu && c.mem_mib >= t.mem_mib) ? 1 : 0;
}

double mig_cost(const ContainerRecord& c, const NodeId& src, const NodeId& dst,
                const LinkModel& links, double serialize_overhead_s) {
  double bw = links.bandwidth_mibps(src, dst);
  if (bw <= 0) throw ConfigError("non-positive bandwidth for " + src + " -> " + dst);
  return c.state_size_mib / bw + serialize_overhead_s;
}

double cold_cost(const Subtask& t, const Calibration& cal) {
  return cal.cold_cost(t.image);
}

AllocationDecision select(const Subtask& t, const WarmPool& local_pool,
                          const NodeId& local_node, const ChordOverlay& overlay,
                          const PoolDirectory& pools, const LinkModel& links,
                          const Calibration& cal, const SelectorConfig& cfg,
                          const PhaseMask& phases) {
  const double cold = cold_cost(t, cal);

  // Phase 1: best compatible ready container in the local pool.
  if (phases.local_search) {
    const ContainerRecord* best = nullptr;
    double best_score = -1.0;
    for (const ContainerRecord* c : local_pool.ready_records()) {
      if (compat(*c, t) != 1) continue;
      double s = score(*c, t, cfg.weights);
      if (s > best_score ||
          (s == best_score && best && c->container_id < best->container_id)) {
        best = c;
        best_score = s;
      }
    }
    if (best) {
      AllocationDecision d;
      d.kind = AllocationKind::kLocalWarm;
      d.container_id = best->container_id;
      d.score = best_score;
      d.cold_cost_s = cold;
      d.startup_latency_s =
          phases.keep_alive_reuse ? cal.reuse(t.image) : cal.handoff(t.image);
      return d;
    }
  }

  // Phase 2: query the k successors of hash(T_img) for gated candidates.
  if (phases.remote_search) {
    struct Candidate {
      const ContainerRecord* rec;
      NodeId node;
      double s;
      double eta;
    };
    std::optional<Candidate> best;
    uint32_t image_key = overlay.space().reduce(ring_digest32(t.image));
    for (const NodeId& node : overlay.successors_of_key(image_key, cfg.k)) {
      if (node == local_node) continue;
      if (!overlay.is_responding(node)) continue;
      const WarmPool* pool = pools.pool_at(node);
      if (!pool) continue;
      for (const ContainerRecord* c : pool->ready_records()) {
        if (image_match_term(*c, t) == 0.0) continue;  // image-indexed query
        double s = score(*c, t, cfg.weights);
        double eta = mig_cost(*c, node, local_node, links, cfg.serialize_overhead_s);
        if (s < cfg.theta_match || eta >= cfg.gamma * cold) continue;
        bool better = false;
        if (!best) {
          better = true;
        } else if (s != best->s) {
          better = s > best->s;
        } else if (eta != best->eta) {
          better = eta < best->eta;
        } else {
          better = c->container_id < best->rec->container_id;
        }
        if (better) best = Candidate{c, node, s, eta};
      }
    }
    if (best) {
      AllocationDecision d;
      d.kind = AllocationKind::kMigratedWarm;
      d.container_id = best->rec->container_id;
      d.source_node = best->node;
      d.score = best->s;
      d.eta_s = best->eta;
      d.cold_cost_s = cold;
      d.startup_latency_s = best->eta + cal.handoff(t.image);
      return d;
    }
  }

  // Phase 3: cold start.
  AllocationDecision d;
  d.kind = AllocationKind::kColdStart;
  d.cold_cost_s = cold;
  d.startup_latency_s = cold;
  return d;
}

}  // namespace swiftbot
