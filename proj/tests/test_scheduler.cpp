// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "swiftbot/common/digest.hpp"
#include "swiftbot/network.hpp"
#include "swiftbot/overlay/chord.hpp"
#include "swiftbot/scheduler/scheduler.hpp"

using namespace swiftbot;

namespace {

Subtask task_of(const std::string& id, const std::string& image, double cpu,
                double mem, std::set<std::string> vols = {}) {
  Subtask t;
  t.subtask_id = id;
  t.image = image;
  t.cpu = cpu;
  t.mem_mib = mem;
  t.volumes = std::move(vols);
  t.hint.preferred_image = image;
  return t;
}

DynamicGroup group_of(uint32_t id, const NodeId& root, std::vector<NodeId> members,
                      double load, std::map<std::string, int> warm = {}) {
  DynamicGroup g;
  g.group_id = id;
  g.root = root;
  g.members = std::move(members);
  g.load = load;
  g.warm_index = std::move(warm);
  return g;
}

ChordOverlay ring_with_registry(
    int n, const std::function<void(int, NodeRegistry&)>& setup) {
  ChordOverlay overlay;
  std::optional<NodeId> bootstrap;
  for (int i = 0; i < n; ++i) {
    NodeId addr = "node-" + std::to_string(i);
    REQUIRE(overlay.join(addr, bootstrap, 0.0) == JoinStatus::kJoined);
    if (!bootstrap) bootstrap = addr;
  }
  for (int i = 0; i < n; ++i) {
    if (setup) setup(i, overlay.registry("node-" + std::to_string(i)));
  }
  return overlay;
}

}  // namespace

TEST_CASE("select_group returns the only live group") {
  SchedulerWeights w;
  Subtask t = task_of("s1", "img", 1, 512);
  std::vector<DynamicGroup> groups = {group_of(7, "r", {"r"}, 0.5)};
  CHECK(select_group(t, groups, w, {}).group_id == 7);
  CHECK_THROWS_AS(select_group(t, {}, w, {}), SchedulingError);
}

TEST_CASE("select_group prefers the group holding a warm match") {
  SchedulerWeights w;
  Subtask t = task_of("s1", "img", 1, 512);
  std::vector<DynamicGroup> groups = {
      group_of(1, "a", {"a"}, 0.5),
      group_of(2, "b", {"b"}, 0.5, {{"img", 2}}),
  };
  CHECK(select_group(t, groups, w, {}).group_id == 2);
}

TEST_CASE("select_group weighs load, locality and warmth together") {
  SchedulerWeights w;
  Subtask t = task_of("s1", "img", 1, 512, {"vol1"});
  std::map<std::string, NodeId> hosts = {{"vol1", "b"}};
  // Group 1 is idle but remote from the data; group 2 is loaded but local
  // and warm: 0.4*1 + 0 + 0 = 0.40 versus 0.4*0.2 + 0.3 + 0.3 = 0.68.
  std::vector<DynamicGroup> groups = {
      group_of(1, "a", {"a"}, 0.0),
      group_of(2, "b", {"b"}, 0.8, {{"img", 1}}),
  };
  CHECK(select_group(t, groups, w, hosts).group_id == 2);
}

TEST_CASE("select_group breaks exact ties toward the lower group id") {
  SchedulerWeights w;
  Subtask t = task_of("s1", "img", 1, 512);
  std::vector<DynamicGroup> groups = {
      group_of(9, "a", {"a"}, 0.5),
      group_of(3, "b", {"b"}, 0.5),
      group_of(5, "c", {"c"}, 0.5),
  };
  CHECK(select_group(t, groups, w, {}).group_id == 3);
}

TEST_CASE("coordinator dispatch is earliest-deadline-first") {
  Subtask a = task_of("a", "img", 1, 256);
  Subtask b = task_of("b", "img", 1, 256);
  Subtask c = task_of("c", "img", 1, 256);
  std::vector<ReadySubtask> ready = {
      {&a, std::nullopt, 1},
      {&b, 5.0, 2},
      {&c, 2.0, 3},
  };
  std::vector<MemberState> members = {{"n0", 8, 4096, 8, 4096, 8}};
  ScheduleResult r = coordinator_schedule(ready, members, nullptr);
  REQUIRE(r.dispatched.size() == 3);
  CHECK(r.dispatched[0].subtask_id == "c");  // tightest deadline first
  CHECK(r.dispatched[1].subtask_id == "b");
  CHECK(r.dispatched[2].subtask_id == "a");  // deadline-less last
}

TEST_CASE("dispatch respects member capacity and queues the excess") {
  Subtask big = task_of("big", "img", 4, 256);
  std::vector<ReadySubtask> ready = {{&big, std::nullopt, 1}};
  std::vector<MemberState> members = {{"n0", 8, 4096, 2, 4096, 8}};
  ScheduleResult r = coordinator_schedule(ready, members, nullptr);
  CHECK(r.dispatched.empty());  // only 2 cores free right now
  CHECK(r.infeasible.empty());  // but it fits the node in principle

  Subtask s1 = task_of("s1", "img", 2, 256);
  Subtask s2 = task_of("s2", "img", 2, 256);
  Subtask s3 = task_of("s3", "img", 2, 256);
  std::vector<ReadySubtask> three = {
      {&s1, std::nullopt, 1}, {&s2, std::nullopt, 2}, {&s3, std::nullopt, 3}};
  std::vector<MemberState> capacity_two = {{"n0", 8, 4096, 4, 4096, 8}};
  ScheduleResult packed = coordinator_schedule(three, capacity_two, nullptr);
  CHECK(packed.dispatched.size() == 2);  // exactly what fits
  CHECK(packed.dispatched[0].subtask_id == "s1");
  CHECK(packed.dispatched[1].subtask_id == "s2");
}

TEST_CASE("subtasks larger than every member are reported infeasible") {
  Subtask monster = task_of("m", "img", 64, 1 << 20);
  std::vector<ReadySubtask> ready = {{&monster, std::nullopt, 1}};
  std::vector<MemberState> members = {{"n0", 8, 8192, 8, 8192, 8},
                                      {"n1", 16, 16384, 16, 16384, 8}};
  ScheduleResult r = coordinator_schedule(ready, members, nullptr);
  CHECK(r.dispatched.empty());
  REQUIRE(r.infeasible.size() == 1);
  CHECK(r.infeasible[0] == "m");
}

TEST_CASE("dispatch balances load and breaks ties toward warm inventory") {
  Subtask t = task_of("s", "img", 1, 256);
  std::vector<ReadySubtask> ready = {{&t, std::nullopt, 1}};

  // Unequal load: the freer member wins regardless of warmth.
  std::vector<MemberState> members = {{"n0", 8, 4096, 8, 4096, 8},
                                      {"n1", 4, 4096, 4, 4096, 8}};
  auto warm_n1 = [](const NodeId& node, const std::string&) {
    return node == "n1" ? 2 : 0;
  };
  ScheduleResult r = coordinator_schedule(ready, members, warm_n1);
  REQUIRE(r.dispatched.size() == 1);
  CHECK(r.dispatched[0].node == "n0");

  // Equal load: warm inventory decides.
  std::vector<ReadySubtask> again = {{&t, std::nullopt, 1}};
  std::vector<MemberState> equal = {{"n0", 8, 4096, 6, 4096, 8},
                                    {"n1", 8, 4096, 6, 4096, 8}};
  ScheduleResult r2 = coordinator_schedule(again, equal, warm_n1);
  REQUIRE(r2.dispatched.size() == 1);
  CHECK(r2.dispatched[0].node == "n1");
}

TEST_CASE("checkpoints must be dependency-closed") {
  SubtaskDag dag;
  Subtask a = task_of("a", "img", 1, 1);
  Subtask b = task_of("b", "img", 1, 1);
  dag.nodes = {a, b};
  dag.edges = {{"a", "b"}};

  Checkpoint good;
  good.completed_subtasks = {"a"};
  CHECK(checkpoint_closed(good, dag));

  Checkpoint both;
  both.completed_subtasks = {"a", "b"};
  CHECK(checkpoint_closed(both, dag));

  Checkpoint broken;
  broken.completed_subtasks = {"b"};  // b done without a
  CHECK_FALSE(checkpoint_closed(broken, dag));

  Checkpoint alien;
  alien.completed_subtasks = {"zz"};
  CHECK_FALSE(checkpoint_closed(alien, dag));
}

TEST_CASE("request_migration picks the step-3 target by the weighted criteria") {
  StaticLinkModel links(90.0, 0.002);
  SchedulerWeights w;

  SUBCASE("a single candidate with enough warm containers wins with warm_fit 1") {
    ChordOverlay overlay = ring_with_registry(6, [](int i, NodeRegistry& reg) {
      reg.warm_by_image["img"] = i == 2 ? 3 : 0;
      reg.load_score = 0.5;
    });
    MigrationRequest req;
    req.reason = MigrationReason::kOverload;
    req.current_node = "node-0";
    req.task_key = 12345;
    req.num_containers = 3;
    req.image = "img";
    TargetChoice choice = request_migration(req, overlay, 5, w, {}, links, nullptr);
    if (choice.status == TargetChoice::kTarget) {
      CHECK(choice.target == "node-2");
    } else {
      // node-2 was not among the key's successors; with k=5 of 6 nodes this
      // only happens when the key routes around it.
      auto succ = overlay.successors_of_key(req.task_key, 5);
      CHECK(std::find(succ.begin(), succ.end(), "node-2") == succ.end());
    }
  }

  SUBCASE("equal candidates split by load") {
    ChordOverlay overlay = ring_with_registry(4, [](int i, NodeRegistry& reg) {
      reg.warm_by_image["img"] = 1;
      reg.load_score = i == 1 ? 0.2 : 0.8;
    });
    MigrationRequest req;
    req.current_node = "node-0";
    req.task_key = 7;
    req.num_containers = 1;
    req.image = "img";
    TargetChoice choice = request_migration(req, overlay, 5, w, {}, links, nullptr);
    REQUIRE(choice.status == TargetChoice::kTarget);
    CHECK(choice.target == "node-1");
  }

  SUBCASE("no warm capacity anywhere defers the migration") {
    ChordOverlay overlay = ring_with_registry(4, [](int, NodeRegistry& reg) {
      reg.warm_by_image.clear();
    });
    MigrationRequest req;
    req.current_node = "node-0";
    req.task_key = 7;
    req.num_containers = 1;
    req.image = "img";
    TargetChoice choice = request_migration(req, overlay, 5, w, {}, links, nullptr);
    CHECK(choice.status == TargetChoice::kDeferred);
  }

  SUBCASE("capacity filter excludes otherwise attractive targets") {
    ChordOverlay overlay = ring_with_registry(4, [](int, NodeRegistry& reg) {
      reg.warm_by_image["img"] = 1;
      reg.load_score = 0.1;
    });
    MigrationRequest req;
    req.current_node = "node-0";
    req.task_key = 7;
    req.num_containers = 1;
    req.image = "img";
    auto no_capacity = [](const NodeId&) { return false; };
    CHECK(request_migration(req, overlay, 5, w, {}, links, no_capacity).status ==
          TargetChoice::kDeferred);
  }
}

TEST_CASE("commit_migration writes the new assignment optimistically") {
  StaticLinkModel links(100.0, 0.002);
  ChordOverlay overlay = ring_with_registry(4, nullptr);

  SubtaskDag dag;
  Subtask a = task_of("a", "img", 1, 1);
  Subtask b = task_of("b", "img", 1, 1);
  Subtask c = task_of("c", "img", 1, 1);
  dag.nodes = {a, b, c};
  dag.edges = {{"a", "b"}, {"b", "c"}};

  MigrationRequest req;
  req.reason = MigrationReason::kOverload;
  req.current_node = "node-0";
  req.task_key = 99;
  req.num_containers = 2;

  SUBCASE("fresh task, empty checkpoint") {
    Checkpoint cp;
    cp.task_key = 99;
    CommitResult r =
        commit_migration(req, "node-1", cp, &dag, overlay, links, 0.05);
    REQUIRE(r.status == CommitResult::kCommitted);
    CHECK(r.entry.assigned_node == "node-1");
    CHECK(r.entry.status == TaskStatus::kInProgress);
    CHECK(r.entry.version.get("node-0") == 1);
    CHECK(r.transfer_s == doctest::Approx(0.05));  // nothing done yet
    auto stored = overlay.get_entry(99);
    REQUIRE(stored.has_value());
    CHECK(stored->assigned_node == "node-1");
  }

  SUBCASE("checkpoint transfer is priced by size over bandwidth") {
    Checkpoint cp;
    cp.task_key = 99;
    cp.completed_subtasks = {"a"};
    cp.partial_results_mib = 50.0;
    CommitResult r =
        commit_migration(req, "node-1", cp, &dag, overlay, links, 0.05);
    REQUIRE(r.status == CommitResult::kCommitted);
    CHECK(r.transfer_s == doctest::Approx(50.0 / 100.0 + 0.05));
  }

  SUBCASE("an unclosed checkpoint is rejected before any write") {
    Checkpoint cp;
    cp.task_key = 99;
    cp.completed_subtasks = {"c"};
    CHECK_THROWS_AS(commit_migration(req, "node-1", cp, &dag, overlay, links, 0.05),
                    SchedulingError);
    CHECK_FALSE(overlay.get_entry(99).has_value());
  }

  SUBCASE("losing the optimistic race aborts and reports the winner") {
    // Both requesters observe an empty slot, then race their commits.
    MigrationRequest mine = req;
    MigrationRequest theirs = req;
    theirs.current_node = "node-2";

    Checkpoint cp;
    cp.task_key = 99;

    CommitResult first =
        commit_migration(theirs, "node-3", cp, &dag, overlay, links, 0.05);
    REQUIRE(first.status == CommitResult::kCommitted);

    // Second commit carries a version that did not see the first write.
    VersionedTaskEntry stale;
    stale.task_key = 99;
    stale.assigned_node = "node-1";
    stale.status = TaskStatus::kInProgress;
    stale.version.bump("node-0");
    PutResult put = overlay.put_entry(stale);
    CHECK(put.status != PutStatus::kCommitted);
    // Either resolved against or stale; committed state is a single winner.
    auto final_entry = overlay.get_entry(99);
    REQUIRE(final_entry.has_value());
    CHECK(final_entry->version.get("node-2") == 1);
  }
}

TEST_CASE("concurrent migration commits converge regardless of order") {
  StaticLinkModel links(100.0, 0.002);
  SubtaskDag dag;
  Subtask a = task_of("a", "img", 1, 1);
  dag.nodes = {a};

  auto run = [&](bool swap) {
    ChordOverlay overlay = ring_with_registry(4, [](int, NodeRegistry& reg) {
      reg.load_score = 0.5;
      reg.availability_score = 0.5;
    });
    MigrationRequest r1;
    r1.current_node = "node-0";
    r1.task_key = 1234;
    MigrationRequest r2;
    r2.current_node = "node-2";
    r2.task_key = 1234;
    Checkpoint cp;
    cp.task_key = 1234;
    // Both requesters observed the empty slot; apply in both orders.
    VersionedTaskEntry e1, e2;
    e1.task_key = e2.task_key = 1234;
    e1.assigned_node = "node-1";
    e2.assigned_node = "node-3";
    e1.status = e2.status = TaskStatus::kInProgress;
    e1.version.bump("node-0");
    e2.version.bump("node-2");
    e1.availability_score = e2.availability_score = 0.5;
    if (swap) {
      overlay.put_entry(e2);
      overlay.put_entry(e1);
    } else {
      overlay.put_entry(e1);
      overlay.put_entry(e2);
    }
    return *overlay.get_entry(1234);
  };

  VersionedTaskEntry x = run(false);
  VersionedTaskEntry y = run(true);
  CHECK(x.same_payload(y));
  CHECK(x.version == y.version);
  CHECK(x.assigned_node == "node-1");  // smaller id wins the tie chain
}

TEST_CASE("overload detection uses hysteresis and one outstanding request") {
  OverloadDetector detector(0.85, 2);

  CHECK_FALSE(detector.on_tick("n", 0.5, false));
  CHECK_FALSE(detector.on_tick("n", 0.9, false));   // first hot tick
  CHECK(detector.on_tick("n", 0.9, false));         // second hot tick fires
  CHECK_FALSE(detector.on_tick("n", 0.9, false));   // still outstanding
  detector.clear("n");
  CHECK_FALSE(detector.on_tick("n", 0.9, false));   // hysteresis restarts
  CHECK(detector.on_tick("n", 0.9, false));

  OverloadDetector starved(0.85, 2);
  CHECK(starved.on_tick("m", 0.1, true));  // queued infeasible fires immediately
  CHECK_FALSE(starved.on_tick("m", 0.1, true));
  CHECK(starved.outstanding("m"));
}

TEST_CASE("groups form from each node and its successors") {
  ChordOverlay overlay = ring_with_registry(6, [](int i, NodeRegistry& reg) {
    reg.load_score = 0.1 * i;
    reg.warm_by_image["img"] = i;
  });
  auto groups = form_groups(overlay, 3);
  REQUIRE(groups.size() == 6);
  for (const auto& g : groups) {
    CHECK(g.members.size() == 3);
    CHECK(g.members.front() == g.root);
    CHECK(g.group_id == overlay.position_of(g.root));
    CHECK(g.load >= 0.0);
    CHECK(g.load <= 1.0);
    int warm_sum = 0;
    for (const auto& m : g.members) {
      std::string idx = m.substr(m.find('-') + 1);
      warm_sum += std::stoi(idx);
    }
    CHECK(g.warm_index.at("img") == warm_sum);
  }
}
