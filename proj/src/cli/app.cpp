// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/cli/app.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "swiftbot/common/errors.hpp"
#include "swiftbot/sim/cluster_sim.hpp"
#include "swiftbot/sim/fl_sim.hpp"
#include "swiftbot/sim/report.hpp"

namespace swiftbot {

namespace {

namespace fs = std::filesystem;

void write_error_record(const std::string& out_dir, const std::string& stage,
                        const std::string& message, const std::string& invariant) {
  nlohmann::json record;
  record["stage"] = stage;
  record["error"] = message;
  if (!invariant.empty()) record["invariant"] = invariant;
  std::cerr << record.dump() << "\n";
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!ec) {
    std::ofstream out(fs::path(out_dir) / "error.json");
    out << record.dump() << "\n";
  }
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  fn(out);
}

SimConfig load_config(const RunManifest& manifest) {
  if (manifest.config_path.empty()) throw ConfigError("--config is required");
  SimConfig cfg = SimConfig::load_file(manifest.config_path);
  if (manifest.seed_override) cfg.seed = *manifest.seed_override;
  return cfg;
}

int guarded(const RunManifest& manifest, const char* stage,
            const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const InvariantViolation& e) {
    write_error_record(manifest.out_dir, stage, e.what(), e.name());
    return kExitInvariant;
  } catch (const ConfigError& e) {
    write_error_record(manifest.out_dir, stage, e.what(), "");
    return kExitConfig;
  } catch (const UnsupportedTaskError& e) {
    write_error_record(manifest.out_dir, stage, e.what(), "");
    return kExitConfig;
  } catch (const std::exception& e) {
    write_error_record(manifest.out_dir, stage, e.what(), "unexpected_exception");
    return kExitInvariant;
  }
}

void emit_common_artifacts(const fs::path& dir, const MetricsCollector& metrics,
                           const SimConfig& cfg, bool include_cdf) {
  write_file(dir / "metrics.csv", [&](std::ostream& o) { metrics.write_metrics_csv(o); });
  write_file(dir / "audit.csv", [&](std::ostream& o) { metrics.write_audit_csv(o); });
  write_file(dir / "migrations.csv",
             [&](std::ostream& o) { metrics.write_migrations_csv(o); });
  if (!metrics.pool_rows().empty()) {
    write_file(dir / "pool.csv", [&](std::ostream& o) { metrics.write_pool_csv(o); });
  }
  SummaryOptions opts;
  opts.include_cdf = include_cdf;
  opts.warmup_s = cfg.warmup_s;
  write_file(dir / "summary.txt",
             [&](std::ostream& o) { write_summary(o, metrics, opts); });
}

}  // namespace

int cmd_run(const RunManifest& manifest) {
  return guarded(manifest, "run", [&] {
    SimConfig cfg = load_config(manifest);
    fs::create_directories(manifest.out_dir);
    MetricsCollector metrics;
    ClusterSim sim(cfg, manifest.policy, metrics);
    ClusterSim::Totals totals = sim.run();

    fs::path dir(manifest.out_dir);
    emit_common_artifacts(dir, metrics, cfg, /*include_cdf=*/true);
    write_file(dir / "ring.jsonl", [&](std::ostream& o) { sim.overlay().export_ring(o); });
    std::cout << "run: policy=" << to_string(manifest.policy)
              << " injected=" << totals.injected << " completed=" << totals.completed
              << " local_hits=" << totals.local_hits
              << " migrations=" << totals.migrations
              << " cold_starts=" << totals.cold_starts << "\n";
  });
}

int cmd_sweep(const RunManifest& manifest) {
  if (manifest.sweep_rates.empty()) return cmd_run(manifest);
  for (size_t i = 1; i < manifest.sweep_rates.size(); ++i) {
    if (manifest.sweep_rates[i] <= manifest.sweep_rates[i - 1]) {
      write_error_record(manifest.out_dir, "sweep",
                         "sweep rates must be strictly increasing", "");
      return kExitConfig;
    }
  }
  return guarded(manifest, "sweep", [&] {
    SimConfig base = load_config(manifest);
    fs::create_directories(manifest.out_dir);
    MetricsCollector metrics;
    for (double rate : manifest.sweep_rates) {
      for (Policy policy :
           {Policy::kSwiftbot, Policy::kLocalWarm, Policy::kColdStart}) {
        SimConfig cfg = base;
        cfg.arrival.type = ArrivalConfig::Type::kPoisson;
        cfg.arrival.rate_tasks_per_s = rate;
        cfg.pool_snapshots = false;
        ClusterSim sim(cfg, policy, metrics);
        sim.run();
      }
    }
    emit_common_artifacts(manifest.out_dir, metrics, base, /*include_cdf=*/false);
  });
}

int cmd_fl(const RunManifest& manifest) {
  return guarded(manifest, "fl", [&] {
    SimConfig cfg = load_config(manifest);
    fs::create_directories(manifest.out_dir);
    MetricsCollector metrics;
    for (AggregationMode mode :
         {AggregationMode::kCentralSync, AggregationMode::kDhtPooled}) {
      FlSim sim(cfg, manifest.profile, manifest.clients, mode, metrics);
      sim.run(cfg.failure_schedule);
    }

    fs::path dir(manifest.out_dir);
    write_file(dir / "metrics.csv", [&](std::ostream& o) { metrics.write_metrics_csv(o); });
    write_file(dir / "migrations.csv",
               [&](std::ostream& o) { metrics.write_migrations_csv(o); });
    SummaryOptions opts;
    opts.include_cdf = false;
    opts.warmup_filter = false;
    write_file(dir / "summary.txt",
               [&](std::ostream& o) { write_summary(o, metrics, opts); });

    std::vector<double> central, pooled;
    for (const auto& s : metrics.samples()) {
      if (s.kind != MetricKind::kRoundTime) continue;
      (s.policy == "fedavg_baseline" ? central : pooled).push_back(s.value);
    }
    if (!central.empty() && !pooled.empty()) {
      std::cout << "fl: profile=" << manifest.profile
                << " clients=" << manifest.clients
                << " central_median_s=" << fmt_fixed(percentile_nearest_rank(central, 50), 1)
                << " pooled_median_s=" << fmt_fixed(percentile_nearest_rank(pooled, 50), 1)
                << "\n";
    }
  });
}

int run_cli(int argc, char** argv) {
  CLI::App app{"decentralized warm-container orchestration simulator"};
  app.require_subcommand(1);

  RunManifest manifest;
  std::string policy_text = "swiftbot";
  std::string sweep_text;
  int64_t seed = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", manifest.config_path, "simulation config (JSON)")
        ->envname("SWIFTBOT_CONFIG");
    cmd->add_option("--out", manifest.out_dir, "artifact directory")
        ->envname("SWIFTBOT_OUT");
    cmd->add_option("--seed", seed, "seed override")->envname("SWIFTBOT_SEED");
  };

  CLI::App* run = app.add_subcommand("run", "single simulation run");
  add_common(run);
  run->add_option("--policy", policy_text, "swiftbot | local_warm | cold_start")
      ->envname("SWIFTBOT_POLICY");

  CLI::App* sweep = app.add_subcommand("sweep", "arrival-rate sweep, all policies");
  add_common(sweep);
  sweep->add_option("--sweep", sweep_text, "comma-separated rates (tasks/s)")
      ->envname("SWIFTBOT_SWEEP");

  CLI::App* fl = app.add_subcommand("fl", "federated round timing comparison");
  add_common(fl);
  fl->add_option("--clients", manifest.clients, "8 | 16 | 24 | 32")
      ->envname("SWIFTBOT_CLIENTS");
  fl->add_option("--profile", manifest.profile, "ucf101 | librispeech")
      ->envname("SWIFTBOT_PROFILE");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (seed >= 0) manifest.seed_override = static_cast<uint64_t>(seed);
  if (auto p = parse_policy(policy_text)) {
    manifest.policy = *p;
  } else {
    write_error_record(manifest.out_dir, "cli", "unknown policy: " + policy_text, "");
    return kExitConfig;
  }
  if (!sweep_text.empty()) {
    std::stringstream ss(sweep_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        manifest.sweep_rates.push_back(std::stod(item));
      } catch (const std::exception&) {
        write_error_record(manifest.out_dir, "cli", "bad sweep rate: " + item, "");
        return kExitConfig;
      }
    }
  }

  if (run->parsed()) return cmd_run(manifest);
  if (sweep->parsed()) return cmd_sweep(manifest);
  if (fl->parsed()) return cmd_fl(manifest);
  return kExitConfig;
}

}  // namespace swiftbot
