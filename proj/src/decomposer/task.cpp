// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/decomposer/task.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>
#include <unordered_set>

namespace swiftbot {

const char* to_string(TaskClass c) {
  switch (c) {
    case TaskClass::kNavigation: return "navigation";
    case TaskClass::kManipulation: return "manipulation";
    case TaskClass::kPerception: return "perception";
    case TaskClass::kMultiRobot: return "multi_robot";
    case TaskClass::kInspection: return "inspection";
    case TaskClass::kHri: return "hri";
    case TaskClass::kMediaVideo: return "media_video";
    case TaskClass::kMediaAudio: return "media_audio";
  }
  return "?";
}

std::optional<TaskClass> parse_task_class(const std::string& s) {
  static const std::map<std::string, TaskClass> table = {
      {"navigation", TaskClass::kNavigation},
      {"manipulation", TaskClass::kManipulation},
      {"perception", TaskClass::kPerception},
      {"multi_robot", TaskClass::kMultiRobot},
      {"inspection", TaskClass::kInspection},
      {"hri", TaskClass::kHri},
      {"media_video", TaskClass::kMediaVideo},
      {"media_audio", TaskClass::kMediaAudio},
  };
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

const Subtask* SubtaskDag::node(const std::string& id) const {
  for (const auto& n : nodes) {
    if (n.subtask_id == id) return &n;
  }
  return nullptr;
}

std::vector<std::string> SubtaskDag::deps_of(const std::string& id) const {
  std::vector<std::string> deps;
  for (const auto& [from, to] : edges) {
    if (to == id) deps.push_back(from);
  }
  return deps;
}

std::optional<std::vector<size_t>> SubtaskDag::topological_order() const {
  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < nodes.size(); ++i) index[nodes[i].subtask_id] = i;

  std::vector<int> in_degree(nodes.size(), 0);
  std::vector<std::vector<size_t>> out(nodes.size());
  for (const auto& [from, to] : edges) {
    auto f = index.find(from), t = index.find(to);
    if (f == index.end() || t == index.end()) return std::nullopt;
    out[f->second].push_back(t->second);
    ++in_degree[t->second];
  }

  std::deque<size_t> frontier;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (in_degree[i] == 0) frontier.push_back(i);
  }
  std::vector<size_t> order;
  order.reserve(nodes.size());
  while (!frontier.empty()) {
    size_t i = frontier.front();
    frontier.pop_front();
    order.push_back(i);
    for (size_t j : out[i]) {
      if (--in_degree[j] == 0) frontier.push_back(j);
    }
  }
  if (order.size() != nodes.size()) return std::nullopt;  // cycle
  return order;
}

bool SubtaskDag::reachable(const std::string& from, const std::string& to) const {
  std::unordered_set<std::string> seen{from};
  std::deque<std::string> frontier{from};
  while (!frontier.empty()) {
    std::string cur = frontier.front();
    frontier.pop_front();
    if (cur == to) return true;
    for (const auto& [a, b] : edges) {
      if (a == cur && seen.insert(b).second) frontier.push_back(b);
    }
  }
  return false;
}

}  // namespace swiftbot
