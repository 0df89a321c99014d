// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace swiftbot {

/// Six robotic domains plus the two media workload classes used by the
/// throughput experiments.
enum class TaskClass {
  kNavigation,
  kManipulation,
  kPerception,
  kMultiRobot,
  kInspection,
  kHri,
  kMediaVideo,
  kMediaAudio,
};

const char* to_string(TaskClass c);
std::optional<TaskClass> parse_task_class(const std::string& s);

struct TaskSpec {
  std::string task_id;
  std::string instruction;
  TaskClass task_class = TaskClass::kMediaVideo;
  std::map<std::string, std::string> params;
  std::optional<double> deadline_s;
};

struct ContainerHint {
  std::string preferred_image;
  std::set<std::string> compatible_images;   // never contains preferred_image
  std::set<std::string> required_volumes;
  std::optional<std::string> locality_preference;
};

struct Subtask {
  std::string subtask_id;
  std::string image;               // T_img
  double cpu = 0.0;                // T_cpu, cores (fractional allowed)
  double mem_mib = 0.0;            // T_mem
  std::set<std::string> volumes;   // T_vol
  double est_duration_s = 0.0;
  int parallel_group = 0;
  ContainerHint hint;
};

struct SubtaskDag {
  std::vector<Subtask> nodes;
  std::vector<std::pair<std::string, std::string>> edges;  // (from, to)

  const Subtask* node(const std::string& id) const;
  std::vector<std::string> deps_of(const std::string& id) const;

  /// Kahn's algorithm; nullopt when the graph has a cycle or an edge
  /// references a missing node.
  std::optional<std::vector<size_t>> topological_order() const;

  /// True if `to` is reachable from `from` along edges.
  bool reachable(const std::string& from, const std::string& to) const;
};

}  // namespace swiftbot
