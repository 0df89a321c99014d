// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "swiftbot/sim/sim_config.hpp"

namespace swiftbot {

/// Exit codes: 0 success, 2 invalid config/usage, 3 runtime invariant
/// violation (the error record names the invariant).
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

struct RunManifest {
  std::string config_path;
  Policy policy = Policy::kSwiftbot;
  std::string out_dir = "out";
  std::optional<uint64_t> seed_override;
  std::vector<double> sweep_rates;  // strictly increasing when present
  int clients = 16;
  std::string profile = "ucf101";
};

/// Single run under one policy: writes metrics.csv, summary.txt, audit.csv,
/// migrations.csv, ring.jsonl (and pool.csv when snapshots are on).
int cmd_run(const RunManifest& manifest);

/// Arrival-rate sweep across all three policies; one summary row per
/// (policy, rate). Empty sweep falls back to cmd_run.
int cmd_sweep(const RunManifest& manifest);

/// Federated round-timing comparison (central_sync vs dht_pooled) for the
/// given client count and timing profile.
int cmd_fl(const RunManifest& manifest);

int run_cli(int argc, char** argv);

}  // namespace swiftbot
