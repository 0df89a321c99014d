// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/decomposer/dag_format.hpp"

#include <algorithm>
#include <string>

#include <nlohmann/json.hpp>

#include "swiftbot/common/errors.hpp"

namespace swiftbot {

using nlohmann::json;

void write_dag(std::ostream& out, const SubtaskDag& dag) {
  for (const auto& node : dag.nodes) {
    std::vector<std::string> deps = dag.deps_of(node.subtask_id);
    std::sort(deps.begin(), deps.end());
    std::vector<std::string> volumes(node.volumes.begin(), node.volumes.end());
    out << "{\"subtask_id\":" << json(node.subtask_id).dump()
        << ",\"image\":" << json(node.image).dump()
        << ",\"cpu\":" << json(node.cpu).dump()
        << ",\"mem_mib\":" << json(node.mem_mib).dump()
        << ",\"volumes\":" << json(volumes).dump()
        << ",\"deps\":" << json(deps).dump()
        << ",\"parallel_group\":" << node.parallel_group
        << ",\"est_duration_s\":" << json(node.est_duration_s).dump() << "}\n";
  }
}

SubtaskDag parse_dag(std::istream& in) {
  SubtaskDag dag;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError("dag line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      Subtask st;
      st.subtask_id = j.at("subtask_id").get<std::string>();
      st.image = j.at("image").get<std::string>();
      st.cpu = j.at("cpu").get<double>();
      st.mem_mib = j.at("mem_mib").get<double>();
      for (const auto& v : j.at("volumes")) st.volumes.insert(v.get<std::string>());
      st.parallel_group = j.at("parallel_group").get<int>();
      st.est_duration_s = j.at("est_duration_s").get<double>();
      st.hint.preferred_image = st.image;
      st.hint.required_volumes = st.volumes;
      for (const auto& d : j.at("deps")) {
        dag.edges.emplace_back(d.get<std::string>(), st.subtask_id);
      }
      dag.nodes.push_back(std::move(st));
    } catch (const json::exception& e) {
      throw ConfigError("dag line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!dag.topological_order()) {
    throw ConfigError("dag is cyclic or references a missing subtask");
  }
  return dag;
}

}  // namespace swiftbot
