// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/sim/sim_config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "swiftbot/common/errors.hpp"

namespace swiftbot {

using nlohmann::json;

const char* to_string(Policy p) {
  switch (p) {
    case Policy::kSwiftbot: return "swiftbot";
    case Policy::kLocalWarm: return "local_warm";
    case Policy::kColdStart: return "cold_start";
  }
  return "?";
}

std::optional<Policy> parse_policy(const std::string& s) {
  if (s == "swiftbot") return Policy::kSwiftbot;
  if (s == "local_warm") return Policy::kLocalWarm;
  if (s == "cold_start") return Policy::kColdStart;
  return std::nullopt;
}

int SimConfig::node_capacity(const NodeProfile& profile) const {
  if (capacity_per_gib > 0) {
    return std::max(1, static_cast<int>(std::lround(profile.mem_mib / 1024.0 *
                                                    capacity_per_gib)));
  }
  return pool.capacity;
}

SimConfig SimConfig::defaults() {
  SimConfig cfg;
  cfg.nodes = {
      {18.0, 16384.0, 1.15},
      {16.0, 16384.0, 1.0},
      {16.0, 16384.0, 1.0},
      {8.0, 16384.0, 0.85},
  };
  cfg.warmup_s = 30.0;
  cfg.capacity_per_gib = 2.0;
  cfg.pool.capacity = 16;
  cfg.pool.ttl_s = 600.0;
  cfg.pool.probe_interval_s = 1.0;
  cfg.pool.prewarm_horizon_s = 10.0;
  cfg.fl.profiles["ucf101"] = {183.0, 0.65};
  cfg.fl.profiles["librispeech"] = {464.0, 0.48};
  cfg.calibration = Calibration::defaults();
  return cfg;
}

namespace {

void parse_network(const json& j, SimConfig& cfg) {
  cfg.default_bandwidth_mibps = j.value("default_bandwidth_mibps", 90.0);
  cfg.default_latency_s = j.value("default_latency_s", 0.002);
  for (const char* key : {"bandwidth_overrides", "latency_overrides"}) {
    if (!j.contains(key)) continue;
    for (const auto& row : j.at(key)) {
      if (!row.is_array() || row.size() != 3) {
        throw ConfigError(std::string("network.") + key +
                          " entries must be [node_a, node_b, value]");
      }
      auto entry = std::make_tuple(row[0].get<std::string>(),
                                   row[1].get<std::string>(), row[2].get<double>());
      if (std::string(key) == "bandwidth_overrides") {
        cfg.bandwidth_overrides.push_back(entry);
      } else {
        cfg.latency_overrides.push_back(entry);
      }
    }
  }
}

void parse_arrival(const json& j, SimConfig& cfg) {
  std::string type = j.value("type", "poisson");
  if (type == "poisson") {
    cfg.arrival.type = ArrivalConfig::Type::kPoisson;
    cfg.arrival.rate_tasks_per_s = j.value("rate_tasks_per_s", 4.0);
    if (cfg.arrival.rate_tasks_per_s <= 0) {
      throw ConfigError("arrival.rate_tasks_per_s must be > 0");
    }
  } else if (type == "trace") {
    cfg.arrival.type = ArrivalConfig::Type::kTrace;
    if (!j.contains("path")) throw ConfigError("arrival.type=trace requires path");
    cfg.arrival.trace_path = j.at("path").get<std::string>();
  } else {
    throw ConfigError("arrival.type must be poisson or trace, got '" + type + "'");
  }
  if (j.contains("classes")) {
    cfg.arrival.classes.clear();
    for (const auto& c : j.at("classes")) {
      auto cls = parse_task_class(c.get<std::string>());
      if (!cls) throw ConfigError("unknown arrival class '" + c.get<std::string>() + "'");
      cfg.arrival.classes.push_back(*cls);
    }
    if (cfg.arrival.classes.empty()) throw ConfigError("arrival.classes is empty");
  }
}

void parse_failures(const json& j, SimConfig& cfg) {
  for (const auto& entry : j) {
    FailureEvent ev;
    if (entry.contains("time_s")) {
      ev.time_s = entry.at("time_s").get<double>();
      for (const auto& n : entry.value("nodes", json::array())) {
        ev.nodes.push_back(n.get<int>());
      }
    }
    if (entry.contains("round")) {
      ev.round = entry.at("round").get<int>();
      for (const auto& c : entry.value("clients", json::array())) {
        ev.clients.push_back(c.get<int>());
      }
    }
    if (!ev.time_s && !ev.round) {
      throw ConfigError("failure_schedule entries need time_s or round");
    }
    ev.rejoin_after_s = entry.value("rejoin_after_s", 0.0);
    cfg.failure_schedule.push_back(std::move(ev));
  }
}

}  // namespace

SimConfig SimConfig::from_json_text(const std::string& text,
                                    const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  SimConfig cfg = defaults();
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.duration_s = j.value("duration_s", cfg.duration_s);
    cfg.warmup_s = j.value("warmup_s", cfg.warmup_s);
    cfg.drain_limit_s = j.value("drain_limit_s", cfg.drain_limit_s);
    cfg.maintenance_interval_s = j.value("maintenance_interval_s", 0.1);
    cfg.pool_snapshots = j.value("pool_snapshots", false);
    cfg.capacity_per_gib = j.value("capacity_per_gib", cfg.capacity_per_gib);

    if (j.contains("nodes")) {
      cfg.nodes.clear();
      for (const auto& n : j.at("nodes")) {
        NodeProfile p;
        p.cores = n.value("cores", 8.0);
        p.mem_mib = n.value("mem_mib", 8192.0);
        p.speed = n.value("speed", 1.0);
        if (p.cores <= 0 || p.mem_mib <= 0 || p.speed <= 0) {
          throw ConfigError("node profiles need positive cores/mem_mib/speed");
        }
        cfg.nodes.push_back(p);
      }
      if (cfg.nodes.empty()) throw ConfigError("nodes must not be empty");
    }
    if (j.contains("network")) parse_network(j.at("network"), cfg);
    if (j.contains("arrival")) parse_arrival(j.at("arrival"), cfg);

    if (j.contains("pool")) {
      const auto& p = j.at("pool");
      cfg.pool.capacity = p.value("capacity", cfg.pool.capacity);
      cfg.pool.ttl_s = p.value("ttl_s", cfg.pool.ttl_s);
      cfg.pool.probe_interval_s = p.value("probe_interval_s", cfg.pool.probe_interval_s);
      cfg.pool.prewarm_horizon_s =
          p.value("prewarm_horizon_s", cfg.pool.prewarm_horizon_s);
    }
    if (j.contains("selector")) {
      const auto& s = j.at("selector");
      cfg.selector.theta_match = s.value("theta_match", cfg.selector.theta_match);
      cfg.selector.gamma = s.value("gamma", cfg.selector.gamma);
      cfg.selector.k = s.value("k", cfg.selector.k);
      cfg.selector.serialize_overhead_s =
          s.value("serialize_overhead_s", cfg.selector.serialize_overhead_s);
      if (s.contains("weights")) {
        const auto& w = s.at("weights");
        cfg.selector.weights.image = w.value("image", 0.5);
        cfg.selector.weights.resources = w.value("resources", 0.3);
        cfg.selector.weights.volumes = w.value("volumes", 0.2);
        double sum = cfg.selector.weights.image + cfg.selector.weights.resources +
                     cfg.selector.weights.volumes;
        if (std::abs(sum - 1.0) > 1e-9) {
          throw ConfigError("selector.weights must sum to 1");
        }
      }
      if (cfg.selector.theta_match < 0 || cfg.selector.theta_match > 1 ||
          cfg.selector.gamma <= 0 || cfg.selector.gamma >= 1 || cfg.selector.k < 1) {
        throw ConfigError("selector: theta in [0,1], gamma in (0,1), k >= 1");
      }
    }
    if (j.contains("scheduler")) {
      const auto& s = j.at("scheduler");
      cfg.scheduler.overload_cpu = s.value("overload_cpu", cfg.scheduler.overload_cpu);
      cfg.scheduler.overload_ticks =
          s.value("overload_ticks", cfg.scheduler.overload_ticks);
      if (s.contains("group_weights")) {
        const auto& w = s.at("group_weights");
        cfg.scheduler.group_load = w.at(0).get<double>();
        cfg.scheduler.group_locality = w.at(1).get<double>();
        cfg.scheduler.group_warm = w.at(2).get<double>();
      }
      if (s.contains("target_weights")) {
        const auto& w = s.at("target_weights");
        cfg.scheduler.target_warm_fit = w.at(0).get<double>();
        cfg.scheduler.target_load = w.at(1).get<double>();
        cfg.scheduler.target_proximity = w.at(2).get<double>();
        cfg.scheduler.target_history = w.at(3).get<double>();
      }
    }
    if (j.contains("overlay")) {
      const auto& o = j.at("overlay");
      cfg.overlay.id_bits = o.value("id_bits", cfg.overlay.id_bits);
      cfg.overlay.successor_count =
          o.value("successor_count", cfg.overlay.successor_count);
      cfg.overlay.heartbeat_interval_s =
          o.value("heartbeat_s", cfg.overlay.heartbeat_interval_s);
      cfg.overlay.heartbeat_timeout_beats =
          o.value("heartbeat_timeout_beats", cfg.overlay.heartbeat_timeout_beats);
      cfg.overlay.stabilize_interval_s =
          o.value("stabilize_s", cfg.overlay.stabilize_interval_s);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      cfg.noise.latency_sigma = n.value("latency_sigma", cfg.noise.latency_sigma);
      cfg.noise.transfer_contention =
          n.value("transfer_contention", cfg.noise.transfer_contention);
      cfg.noise.contention_cap = n.value("contention_cap", cfg.noise.contention_cap);
      cfg.noise.handoff_load_factor =
          n.value("handoff_load_factor", cfg.noise.handoff_load_factor);
    }
    if (j.contains("fl")) {
      const auto& f = j.at("fl");
      cfg.fl.clients = f.value("clients", cfg.fl.clients);
      cfg.fl.rounds = f.value("rounds", cfg.fl.rounds);
      cfg.fl.shards_per_client = f.value("shards_per_client", cfg.fl.shards_per_client);
      cfg.fl.model_mib = f.value("model_mib", cfg.fl.model_mib);
      cfg.fl.shard_mib = f.value("shard_mib", cfg.fl.shard_mib);
      cfg.fl.aggregation_s = f.value("aggregation_s", cfg.fl.aggregation_s);
      cfg.fl.upload_bandwidth_mibps =
          f.value("upload_bandwidth_mibps", cfg.fl.upload_bandwidth_mibps);
      cfg.fl.failure_offset_frac =
          f.value("failure_offset_frac", cfg.fl.failure_offset_frac);
      cfg.fl.rejoin_after_s = f.value("rejoin_after_s", cfg.fl.rejoin_after_s);
      if (f.contains("profiles")) {
        for (const auto& [name, p] : f.at("profiles").items()) {
          cfg.fl.profiles[name] = {p.value("median_s", 180.0), p.value("sigma", 0.6)};
        }
      }
    }
    if (j.contains("failure_schedule")) parse_failures(j.at("failure_schedule"), cfg);

    if (j.contains("calibration_file")) {
      std::filesystem::path p = j.at("calibration_file").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) {
        p = std::filesystem::path(base_dir) / p;
      }
      cfg.calibration = Calibration::load_file(p.string());
    }
    if (j.contains("arrival") && cfg.arrival.type == ArrivalConfig::Type::kTrace) {
      std::filesystem::path p = cfg.arrival.trace_path;
      if (p.is_relative() && !base_dir.empty()) {
        cfg.arrival.trace_path = (std::filesystem::path(base_dir) / p).string();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

SimConfig SimConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), std::filesystem::path(path).parent_path().string());
}

}  // namespace swiftbot
