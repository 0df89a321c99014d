// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "swiftbot/common/errors.hpp"
#include "swiftbot/common/rng.hpp"
#include "swiftbot/sim/report.hpp"
#include "swiftbot/sim/trace.hpp"

using namespace swiftbot;

TEST_CASE("nearest-rank percentiles on hand-computable samples") {
  CHECK(percentile_nearest_rank({1, 2, 3, 4}, 50) == doctest::Approx(2.0));
  CHECK(percentile_nearest_rank({4, 3, 2, 1}, 50) == doctest::Approx(2.0));
  CHECK(percentile_nearest_rank({1, 2, 3, 4}, 100) == doctest::Approx(4.0));
  CHECK(percentile_nearest_rank({1, 2, 3, 4}, 25) == doctest::Approx(1.0));

  // A single sample is every percentile.
  CHECK(percentile_nearest_rank({7.5}, 50) == doctest::Approx(7.5));
  CHECK(percentile_nearest_rank({7.5}, 99) == doctest::Approx(7.5));

  CHECK_THROWS_AS(percentile_nearest_rank({}, 50), ConfigError);
  CHECK_THROWS_AS(percentile_nearest_rank({1.0}, 0), ConfigError);
  CHECK_THROWS_AS(percentile_nearest_rank({1.0}, 101), ConfigError);
}

TEST_CASE("percentiles match an independent sort-based oracle on 10k samples") {
  Rng rng(314);
  std::vector<double> samples;
  for (int i = 0; i < 10000; ++i) samples.push_back(rng.lognormal(0.2, 0.5));

  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  for (double p : {1.0, 10.0, 50.0, 90.0, 99.0, 99.9}) {
    size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * sorted.size()));
    double expect = sorted[rank - 1];
    CHECK(percentile_nearest_rank(samples, p) == doctest::Approx(expect));
  }
}

TEST_CASE("the millisecond cdf grid is monotone and ends at 1") {
  std::vector<double> samples = {0.0005, 0.0015, 0.0015, 0.010};
  auto cdf = cdf_millisecond_grid(samples);
  REQUIRE(!cdf.empty());
  CHECK(cdf.front().t_s == doctest::Approx(0.0));
  CHECK(cdf.back().fraction == doctest::Approx(1.0));
  for (size_t i = 1; i < cdf.size(); ++i) {
    CHECK(cdf[i].fraction >= cdf[i - 1].fraction);
    CHECK(cdf[i].t_s - cdf[i - 1].t_s == doctest::Approx(0.001));
  }
  // 1 ms grid point right after the two 1.5 ms samples.
  CHECK(cdf[2].fraction == doctest::Approx(3.0 / 4.0));
}

TEST_CASE("summary tables group by policy and rate deterministically") {
  MetricsCollector metrics;
  for (int i = 0; i < 10; ++i) {
    metrics.add(MetricSample{MetricKind::kStartupLatency, 0.1 * (i + 1), "swiftbot",
                             4.0, std::nullopt, "node-0", 30.0 + i});
    metrics.add(MetricSample{MetricKind::kStartupLatency, 0.2 * (i + 1), "cold_start",
                             4.0, std::nullopt, "node-0", 30.0 + i});
  }
  metrics.add(MetricSample{MetricKind::kRoundTime, 100.0, "fedavg_baseline",
                           std::nullopt, 1, "", 100.0});

  std::ostringstream out;
  SummaryOptions opts;
  opts.include_cdf = false;
  opts.warmup_s = 0.0;
  write_summary(out, metrics, opts);
  std::string text = out.str();
  CHECK(text.find("== startup latency (s) ==") != std::string::npos);
  CHECK(text.find("cold_start,4.000,10") != std::string::npos);
  CHECK(text.find("swiftbot,4.000,10") != std::string::npos);
  CHECK(text.find("== round time (s) ==") != std::string::npos);

  // Warmup filtering drops early samples.
  std::ostringstream filtered;
  opts.warmup_filter = true;
  opts.warmup_s = 35.0;
  write_summary(filtered, metrics, opts);
  CHECK(filtered.str().find("swiftbot,4.000,5") != std::string::npos);
}

TEST_CASE("empty cells are absent from the summary, not zero") {
  MetricsCollector metrics;
  std::ostringstream out;
  SummaryOptions opts;
  write_summary(out, metrics, opts);
  std::string text = out.str();
  CHECK(text.find("p50") != std::string::npos);  // header only
  CHECK(text.find("swiftbot") == std::string::npos);
}

TEST_CASE("workload traces parse and report malformed lines by number") {
  std::istringstream good(
      "# comment line\n"
      "0.000 task-1 media_video\n"
      "0.500 task-2 media_audio fan_out=2\n"
      "\n"
      "1.250 task-3 media_video deadline_s=4.5\n");
  auto tasks = parse_trace(good);
  REQUIRE(tasks.size() == 3);
  CHECK(tasks[0].arrival_s == doctest::Approx(0.0));
  CHECK(tasks[1].spec.params.at("fan_out") == "2");
  CHECK(tasks[2].spec.deadline_s == doctest::Approx(4.5));

  auto expect_line = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      parse_trace(in);
      FAIL_CHECK("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_line("0.0 t1 media_video\nbroken\n", "line 2");
  expect_line("0.0 t1 warp_drive\n", "unknown task class");
  expect_line("abc t1 media_video\n", "bad arrival time");
  expect_line("0.0 t1 media_video oops\n", "key=value");
  expect_line("-1 t1 media_video\n", "negative");
}

TEST_CASE("trace round-trips through write_trace") {
  auto tasks = synth_trace(25, TaskClass::kMediaVideo, 2.0, 7);
  REQUIRE(tasks.size() == 25);
  for (size_t i = 1; i < tasks.size(); ++i) {
    CHECK(tasks[i].arrival_s > tasks[i - 1].arrival_s);
  }
  std::ostringstream out;
  write_trace(out, tasks);
  std::istringstream in(out.str());
  auto parsed = parse_trace(in);
  REQUIRE(parsed.size() == tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i) {
    CHECK(parsed[i].spec.task_id == tasks[i].spec.task_id);
    CHECK(parsed[i].spec.task_class == tasks[i].spec.task_class);
    CHECK(parsed[i].arrival_s == doctest::Approx(tasks[i].arrival_s).epsilon(0.001));
  }
}
