// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "oracle_helpers.hpp"
#include "swiftbot/calibration.hpp"
#include "swiftbot/common/errors.hpp"
#include "swiftbot/decomposer/dag_format.hpp"
#include "swiftbot/decomposer/decomposer.hpp"

using namespace swiftbot;

namespace {

Decomposer make_decomposer() {
  return Decomposer(Calibration::defaults().exec_seconds_by_image());
}

TaskSpec spec_of(TaskClass cls, std::map<std::string, std::string> params = {}) {
  TaskSpec s;
  s.task_id = "task-1";
  s.task_class = cls;
  s.instruction = to_string(cls);
  s.params = std::move(params);
  return s;
}

std::vector<std::string> images_of(const SubtaskDag& dag) {
  std::vector<std::string> out;
  for (const auto& n : dag.nodes) out.push_back(n.image);
  return out;
}

}  // namespace

TEST_CASE("video tasks decompose into the three-stage pipeline") {
  auto d = make_decomposer();
  SubtaskDag dag = d.decompose(spec_of(TaskClass::kMediaVideo));
  REQUIRE(dag.nodes.size() == 3);
  CHECK(dag.edges.size() == 2);
  CHECK(images_of(dag) == std::vector<std::string>{"extract", "encode3d", "classify"});
  CHECK(dag.edges[0] == std::pair<std::string, std::string>{"task-1.extract",
                                                            "task-1.encode3d"});
  CHECK(dag.edges[1] == std::pair<std::string, std::string>{"task-1.encode3d",
                                                            "task-1.classify"});
}

TEST_CASE("audio tasks decompose into the three-stage pipeline") {
  auto d = make_decomposer();
  SubtaskDag dag = d.decompose(spec_of(TaskClass::kMediaAudio));
  REQUIRE(dag.nodes.size() == 3);
  CHECK(dag.edges.size() == 2);
  CHECK(images_of(dag) ==
        std::vector<std::string>{"audio_prep", "acoustic_infer", "lang_correct"});
}

TEST_CASE("fan_out=4 produces four parallel encode subtasks in one group") {
  auto d = make_decomposer();
  SubtaskDag dag = d.decompose(spec_of(TaskClass::kMediaVideo, {{"fan_out", "4"}}));
  REQUIRE(dag.nodes.size() == 6);  // extract + 4x encode + classify
  std::vector<const Subtask*> encodes;
  for (const auto& n : dag.nodes) {
    if (n.image == "encode3d") encodes.push_back(&n);
  }
  REQUIRE(encodes.size() == 4);
  int group = encodes[0]->parallel_group;
  for (const auto* e : encodes) {
    CHECK(e->parallel_group == group);
    CHECK(dag.deps_of(e->subtask_id) == std::vector<std::string>{"task-1.extract"});
  }
  // No dependency path between any same-group pair, checked independently.
  for (const auto* a : encodes) {
    for (const auto* b : encodes) {
      if (a == b) continue;
      CHECK_FALSE(oracle::dag_reachable(dag, a->subtask_id, b->subtask_id));
    }
  }
  // classify joins all four branches.
  CHECK(dag.deps_of("task-1.classify").size() == 4);
}

TEST_CASE("cascade routing: small sequential plans go to the fast path") {
  auto d = make_decomposer();
  CHECK(d.route(spec_of(TaskClass::kMediaAudio)) == RoutePath::kFastPath);
  CHECK(d.route(spec_of(TaskClass::kMediaVideo, {{"fan_out", "4"}})) ==
        RoutePath::kLargePath);  // estimated 6 nodes
  CHECK(d.route(spec_of(TaskClass::kInspection)) == RoutePath::kLargePath);  // 4 stages
  CHECK(d.route(spec_of(TaskClass::kMultiRobot)) == RoutePath::kLargePath);  // fan-out
  // Determinism: same spec, same route.
  CHECK(d.route(spec_of(TaskClass::kMediaAudio)) ==
        d.route(spec_of(TaskClass::kMediaAudio)));
}

TEST_CASE("property: adding fan-out never moves a spec to the fast path") {
  auto d = make_decomposer();
  for (TaskClass cls : {TaskClass::kNavigation, TaskClass::kManipulation,
                        TaskClass::kPerception, TaskClass::kMultiRobot,
                        TaskClass::kInspection, TaskClass::kHri,
                        TaskClass::kMediaVideo, TaskClass::kMediaAudio}) {
    RoutePath base = d.route(spec_of(cls));
    for (int fan = 2; fan <= 5; ++fan) {
      RoutePath fanned = d.route(spec_of(cls, {{"fan_out", std::to_string(fan)}}));
      bool stage_is_fannable = false;
      for (const auto& st : Decomposer::pipeline(cls)) {
        stage_is_fannable = stage_is_fannable || st.fan_out_capable;
      }
      if (stage_is_fannable) {
        CHECK(fanned == RoutePath::kLargePath);
      } else {
        CHECK(fanned == base);
      }
    }
  }
}

TEST_CASE("every class yields an acyclic dag with consistent hints and groups") {
  auto d = make_decomposer();
  int id = 0;
  for (TaskClass cls : {TaskClass::kNavigation, TaskClass::kManipulation,
                        TaskClass::kPerception, TaskClass::kMultiRobot,
                        TaskClass::kInspection, TaskClass::kHri,
                        TaskClass::kMediaVideo, TaskClass::kMediaAudio}) {
    for (int fan : {1, 3}) {
      TaskSpec spec = spec_of(cls, {{"fan_out", std::to_string(fan)}});
      spec.task_id = "p-" + std::to_string(id++);
      SubtaskDag dag = d.decompose(spec);
      CHECK(dag.topological_order().has_value());
      CHECK(oracle::dag_acyclic(dag));
      for (const auto& n : dag.nodes) {
        CHECK(n.image == n.hint.preferred_image);
        CHECK(n.hint.compatible_images.count(n.hint.preferred_image) == 0);
        CHECK(n.cpu > 0);
        CHECK(n.mem_mib > 0);
        CHECK(n.est_duration_s > 0);
      }
      for (const auto& a : dag.nodes) {
        for (const auto& b : dag.nodes) {
          if (a.subtask_id == b.subtask_id) continue;
          if (a.parallel_group == b.parallel_group) {
            CHECK_FALSE(oracle::dag_reachable(dag, a.subtask_id, b.subtask_id));
          }
        }
      }
    }
  }
}

TEST_CASE("feedback updates stage estimates by ewma") {
  auto d = make_decomposer();
  TaskSpec spec = spec_of(TaskClass::kMediaVideo);
  d.decompose(spec);

  SUBCASE("observation equal to the estimate is a fixed point") {
    double before = d.estimate(TaskClass::kMediaVideo, "extract");
    d.record_feedback("task-1", TaskOutcome::kSuccess, {{"extract", before}});
    CHECK(d.estimate(TaskClass::kMediaVideo, "extract") == doctest::Approx(before));
  }

  SUBCASE("prior 10, observation 20, alpha 0.3 gives 13") {
    for (int i = 0; i < 400; ++i) {
      d.record_feedback("task-1", TaskOutcome::kSuccess, {{"extract", 10.0}});
    }
    CHECK(d.estimate(TaskClass::kMediaVideo, "extract") == doctest::Approx(10.0));
    d.record_feedback("task-1", TaskOutcome::kSuccess, {{"extract", 20.0}});
    CHECK(d.estimate(TaskClass::kMediaVideo, "extract") == doctest::Approx(13.0));
  }

  SUBCASE("failures leave durations unchanged and count") {
    double before = d.estimate(TaskClass::kMediaVideo, "extract");
    d.record_feedback("task-1", TaskOutcome::kFailure, {{"extract", 99.0}});
    CHECK(d.estimate(TaskClass::kMediaVideo, "extract") == doctest::Approx(before));
    CHECK(d.failure_count(TaskClass::kMediaVideo) == 1);
  }

  SUBCASE("unknown task ids are ignored with a warning") {
    d.record_feedback("nope", TaskOutcome::kSuccess, {{"extract", 5.0}});
    CHECK(d.unknown_feedback_warnings() == 1);
    CHECK(d.estimate(TaskClass::kMediaVideo, "extract") > 0);
  }
}

TEST_CASE("unknown task classes are rejected, never an empty dag") {
  CHECK_THROWS_AS(parse_spec_request("t9 teleportation"), UnsupportedTaskError);
  auto d = make_decomposer();
  CHECK_THROWS_AS(d.decompose(spec_of(TaskClass::kMediaVideo, {{"fan_out", "zero"}})),
                  ConfigError);
}

TEST_CASE("dag exchange format round-trips through parse") {
  auto d = make_decomposer();
  for (TaskClass cls : {TaskClass::kMediaVideo, TaskClass::kMultiRobot}) {
    TaskSpec spec = spec_of(cls, {{"fan_out", "3"}});
    spec.task_id = std::string("rt-") + to_string(cls);
    SubtaskDag dag = d.decompose(spec);

    std::ostringstream out;
    write_dag(out, dag);
    std::istringstream in(out.str());
    SubtaskDag parsed = parse_dag(in);

    REQUIRE(parsed.nodes.size() == dag.nodes.size());
    CHECK(parsed.edges.size() == dag.edges.size());
    for (size_t i = 0; i < dag.nodes.size(); ++i) {
      CHECK(parsed.nodes[i].subtask_id == dag.nodes[i].subtask_id);
      CHECK(parsed.nodes[i].image == dag.nodes[i].image);
      CHECK(parsed.nodes[i].cpu == dag.nodes[i].cpu);
      CHECK(parsed.nodes[i].mem_mib == dag.nodes[i].mem_mib);
      CHECK(parsed.nodes[i].volumes == dag.nodes[i].volumes);
      CHECK(parsed.nodes[i].parallel_group == dag.nodes[i].parallel_group);
      CHECK(parsed.nodes[i].est_duration_s ==
            doctest::Approx(dag.nodes[i].est_duration_s));
    }
  }
}

TEST_CASE("dag parse failures name the line") {
  std::istringstream bad("{\"subtask_id\":\"a\"}\nnot json\n");
  try {
    parse_dag(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  std::istringstream cyclic(
      "{\"subtask_id\":\"a\",\"image\":\"x\",\"cpu\":1,\"mem_mib\":1,"
      "\"volumes\":[],\"deps\":[\"b\"],\"parallel_group\":0,\"est_duration_s\":1}\n"
      "{\"subtask_id\":\"b\",\"image\":\"x\",\"cpu\":1,\"mem_mib\":1,"
      "\"volumes\":[],\"deps\":[\"a\"],\"parallel_group\":1,\"est_duration_s\":1}\n");
  CHECK_THROWS_AS(parse_dag(cyclic), ConfigError);
}

TEST_CASE("the rule-backed model client speaks the exchange format") {
  auto d = make_decomposer();
  RuleBackedModelClient client(d);
  TaskSpec spec = spec_of(TaskClass::kMediaAudio);
  std::string response = client.decompose(format_spec_request(spec));
  std::istringstream in(response);
  SubtaskDag dag = parse_dag(in);
  REQUIRE(dag.nodes.size() == 3);
  CHECK(dag.nodes[0].image == "audio_prep");
}
