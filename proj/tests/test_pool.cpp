// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "swiftbot/calibration.hpp"
#include "swiftbot/common/errors.hpp"
#include "swiftbot/common/rng.hpp"
#include "swiftbot/pool/warm_pool.hpp"

using namespace swiftbot;

namespace {

Calibration test_cal() {
  Calibration cal;
  ImageCosts heavy;  // slow to initialize, worth retaining
  heavy.pull_s = 4.0;
  heavy.init_s = 1.0;
  heavy.handoff_s = 0.12;
  heavy.resume_ratio = 0.25;
  heavy.state_mib = 30;
  cal.set("heavy", heavy);

  ImageCosts light;
  light.pull_s = 0.5;
  light.init_s = 0.5;
  light.handoff_s = 0.12;
  light.resume_ratio = 0.25;
  light.state_mib = 10;
  cal.set("light", light);

  ImageCosts model;  // stateful, volume-backed
  model.pull_s = 2.0;
  model.init_s = 2.0;
  model.handoff_s = 0.12;
  model.resume_ratio = 0.25;
  model.state_mib = 50;
  cal.set("model", model);
  return cal;
}

PoolConfig cfg_of(int capacity, double ttl = 600) {
  PoolConfig cfg;
  cfg.capacity = capacity;
  cfg.ttl_s = ttl;
  cfg.probe_interval_s = 1.0;
  cfg.prewarm_horizon_s = 10.0;
  return cfg;
}

// Admit and promote to ready at `now`.
std::string warm_ready(WarmPool& pool, const std::string& image, double now) {
  auto r = pool.admit_warm(image, 1.0, 512, {}, false, now, 0.0);
  REQUIRE(r.admitted);
  pool.refresh(now);
  return r.container_id;
}

}  // namespace

TEST_CASE("admission into a free pool becomes ready after the init cost") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(4), cal);
  auto r = pool.admit_warm("light", 1.0, 512, {}, false, 10.0);
  REQUIRE(r.admitted);
  CHECK(r.ready_at == doctest::Approx(10.0 + 1.0));  // pull + init
  CHECK(pool.find(r.container_id)->status == ContainerStatus::kWarming);
  pool.refresh(10.5);
  CHECK(pool.find(r.container_id)->status == ContainerStatus::kWarming);
  pool.refresh(11.0);
  CHECK(pool.find(r.container_id)->status == ContainerStatus::kReady);
}

TEST_CASE("a full pool with everything in use rejects admission") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(2), cal);
  for (int i = 0; i < 2; ++i) {
    auto id = warm_ready(pool, "light", 0.0);
    REQUIRE(pool.mark_in_use(id, 0.0));
  }
  auto r = pool.admit_warm("light", 1.0, 512, {}, false, 1.0);
  CHECK_FALSE(r.admitted);
  CHECK(r.reject_reason == "capacity");
  CHECK(pool.occupancy() == 2);
}

TEST_CASE("a full pool evicts the lowest-retention ready record to admit") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(2), cal);
  auto keeper = warm_ready(pool, "heavy", 0.0);
  auto victim = warm_ready(pool, "light", 0.0);
  // keeper: higher init cost, equal access/mem profile except image memory.
  auto r = pool.admit_warm("light", 1.0, 512, {}, false, 5.0);
  REQUIRE(r.admitted);
  REQUIRE(r.evicted.size() == 1);
  CHECK(r.evicted[0] == victim);
  CHECK(pool.find(keeper) != nullptr);
  CHECK(pool.find(victim) == nullptr);
}

TEST_CASE("eviction order follows the retention score") {
  Calibration cal = test_cal();

  SUBCASE("ties break toward the oldest last_access") {
    WarmPool pool("node-a", cfg_of(4), cal);
    auto older = warm_ready(pool, "light", 0.0);
    auto newer = warm_ready(pool, "light", 0.0);
    pool.mark_in_use(older, 1.0);
    pool.release(older, 2.0);
    pool.mark_in_use(newer, 3.0);
    pool.release(newer, 4.0);
    // Same access_count, init_cost and memory; only last_access differs.
    auto victims = pool.evict_candidates(1, 10.0);
    REQUIRE(victims.size() == 1);
    CHECK(victims[0] == older);
  }

  SUBCASE("frequently used, expensive records are retained") {
    WarmPool pool("node-a", cfg_of(4), cal);
    auto a = warm_ready(pool, "heavy", 0.0);  // init 5s
    auto b = warm_ready(pool, "light", 0.0);  // init 1s
    for (int i = 0; i < 10; ++i) {  // A used 10x, B once
      pool.mark_in_use(a, i + 1.0);
      pool.release(a, i + 1.5);
    }
    pool.mark_in_use(b, 12.0);
    pool.release(b, 12.5);
    // RS(a) = 0.4*1 + 0.4*1 - 0.2*norm(mem); RS(b) = -0.2*norm(mem).
    auto victims = pool.evict_candidates(2, 20.0);
    REQUIRE(victims.size() == 2);
    CHECK(victims[0] == b);
    CHECK(victims[1] == a);
  }

  SUBCASE("in_use records are never candidates") {
    WarmPool pool("node-a", cfg_of(4), cal);
    auto a = warm_ready(pool, "light", 0.0);
    auto b = warm_ready(pool, "light", 0.0);
    pool.mark_in_use(a, 1.0);
    auto victims = pool.evict_candidates(5, 2.0);
    REQUIRE(victims.size() == 1);
    CHECK(victims[0] == b);
  }
}

TEST_CASE("evicting an in_use record is an invariant violation") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(4), cal);
  auto id = warm_ready(pool, "light", 0.0);
  pool.mark_in_use(id, 1.0);
  CHECK_THROWS_AS(pool.evict(id, 2.0), InvariantViolation);
}

TEST_CASE("health probes degrade flagged records and selection skips them") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(4), cal);
  auto healthy = warm_ready(pool, "light", 0.0);
  auto sick = warm_ready(pool, "light", 0.0);

  auto before = pool.probe_health(1.0);
  CHECK(before.empty());

  pool.inject_degradation(sick);
  auto degraded = pool.probe_health(2.0);
  REQUIRE(degraded.size() == 1);
  CHECK(degraded[0].first == sick);
  CHECK(pool.find(sick)->status == ContainerStatus::kDegraded);

  auto ready = pool.ready_records();
  REQUIRE(ready.size() == 1);
  CHECK(ready[0]->container_id == healthy);

  // The next maintenance pass retires the degraded record.
  pool.maintenance_tick(3.0, 0.1);
  CHECK(pool.find(sick) == nullptr);
}

TEST_CASE("idle ready records expire after the ttl") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(4, /*ttl=*/60.0), cal);
  auto idle = warm_ready(pool, "light", 0.0);
  auto used = warm_ready(pool, "light", 0.0);
  pool.maintenance_tick(50.0, 0.1);
  pool.mark_in_use(used, 55.0);
  pool.release(used, 56.0);
  REQUIRE(pool.find(idle) != nullptr);

  auto report = pool.maintenance_tick(61.0, 0.1);
  REQUIRE(report.ttl_evicted.size() == 1);
  CHECK(report.ttl_evicted[0] == idle);
  CHECK(pool.find(idle) == nullptr);
  CHECK(pool.find(used) != nullptr);
}

TEST_CASE("stateful records resume faster than a cold init") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(4), cal);
  auto r1 = pool.admit_warm("model", 1.0, 1024, {"models"}, true, 0.0);
  REQUIRE(r1.admitted);
  CHECK(r1.ready_at == doctest::Approx(4.0));  // full cold cost
  pool.refresh(4.0);
  pool.evict(r1.container_id, 5.0);

  auto r2 = pool.admit_warm("model", 1.0, 1024, {"models"}, true, 6.0);
  REQUIRE(r2.admitted);
  CHECK(r2.ready_at == doctest::Approx(6.0 + 0.25 * 4.0));  // resume_ratio
}

TEST_CASE("prewarm plan follows the ewma demand forecast") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(8), cal);

  SUBCASE("no observed arrivals, no plan") {
    CHECK(pool.prewarm_plan(0.0).empty());
  }

  SUBCASE("rate 0.5/s with a 10 s horizon and 2 warm plans 3 more") {
    warm_ready(pool, "light", 0.0);
    warm_ready(pool, "light", 0.0);
    pool.set_arrival_rate("light", 0.5);
    auto plan = pool.prewarm_plan(1.0);
    REQUIRE(plan.size() == 1);
    CHECK(plan[0].first == "light");
    CHECK(plan[0].second == 3);  // ceil(0.5*10) - 2
  }

  SUBCASE("plans never exceed free capacity") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
      WarmPool p("node-b", cfg_of(2 + rng.uniform_index(8)), cal);
      int occupants = rng.uniform_index(p.config().capacity + 1);
      for (int i = 0; i < occupants; ++i) {
        warm_ready(p, rng.uniform01() < 0.5 ? "light" : "heavy", 0.0);
      }
      p.set_arrival_rate("light", rng.uniform(0.0, 3.0));
      p.set_arrival_rate("heavy", rng.uniform(0.0, 3.0));
      int planned = 0;
      for (const auto& [image, count] : p.prewarm_plan(1.0)) {
        CHECK(count > 0);
        planned += count;
      }
      CHECK(planned <= p.slots_free());
    }
  }
}

TEST_CASE("arrival rates update by ewma over maintenance ticks") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(4), cal);
  for (int i = 0; i < 5; ++i) pool.note_arrival("light");
  pool.maintenance_tick(1.0, 1.0);  // observed 5/s
  CHECK(pool.arrival_rate("light") == doctest::Approx(0.3 * 5.0));
  pool.maintenance_tick(2.0, 1.0);  // observed 0
  CHECK(pool.arrival_rate("light") == doctest::Approx(0.7 * 0.3 * 5.0));
}

TEST_CASE("property: occupancy never exceeds capacity over random op sequences") {
  Calibration cal = test_cal();
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    int capacity = 1 + rng.uniform_index(6);
    WarmPool pool("node-p", cfg_of(capacity, 30.0), cal);
    double now = 0.0;
    std::set<std::string> known;
    for (int step = 0; step < 300; ++step) {
      now += rng.uniform(0.0, 2.0);
      double op = rng.uniform01();
      if (op < 0.4) {
        auto r = pool.admit_warm(rng.uniform01() < 0.5 ? "light" : "heavy", 1.0, 512,
                                 {}, rng.uniform01() < 0.3, now);
        if (r.admitted) known.insert(r.container_id);
      } else if (op < 0.6) {
        auto ready = pool.ready_records();
        if (!ready.empty()) {
          pool.mark_in_use(ready[rng.uniform_index(ready.size())]->container_id, now);
        }
      } else if (op < 0.8) {
        for (const auto* rec : pool.records()) {
          if (rec->status == ContainerStatus::kInUse) {
            pool.release(rec->container_id, now);
            break;
          }
        }
      } else {
        pool.maintenance_tick(now, 0.5);
      }
      CHECK(pool.occupancy() <= capacity);
      int bound = pool.count(ContainerStatus::kWarming) +
                  pool.count(ContainerStatus::kReady) +
                  pool.count(ContainerStatus::kInUse);
      CHECK(bound <= capacity);
    }
    // Full event log: no eviction ever touched an in_use record.
    for (const auto& ev : pool.events()) {
      if (ev.kind == "evict") {
        CHECK(ev.prior != ContainerStatus::kInUse);
      }
    }
  }
}

TEST_CASE("status transitions outside the lifecycle are rejected") {
  Calibration cal = test_cal();
  WarmPool pool("node-a", cfg_of(4), cal);
  auto r = pool.admit_warm("light", 1.0, 512, {}, false, 0.0);
  REQUIRE(r.admitted);
  // Still warming: cannot go in_use.
  CHECK_FALSE(pool.mark_in_use(r.container_id, 0.5));
  pool.refresh(1.0);
  CHECK(pool.mark_in_use(r.container_id, 1.0));
  CHECK_FALSE(pool.mark_in_use(r.container_id, 1.1));  // already in use
  CHECK(pool.release(r.container_id, 2.0));
  CHECK_FALSE(pool.release(r.container_id, 2.1));  // not in use anymore
}
