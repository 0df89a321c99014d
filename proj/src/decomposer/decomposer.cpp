// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/decomposer/decomposer.hpp"

#include <sstream>

#include "swiftbot/common/errors.hpp"
#include "swiftbot/decomposer/dag_format.hpp"

namespace swiftbot {

namespace {

std::map<TaskClass, std::vector<StageRule>> build_rule_table() {
  std::map<TaskClass, std::vector<StageRule>> t;

  t[TaskClass::kMediaVideo] = {
      {"extract", "extract", 0.5, 512, {"media_store"}, {}, false, 1},
      {"encode3d", "encode3d", 1.0, 1536, {"media_store", "models_video"},
       {"encode3d_lite"}, true, 1},
      {"classify", "classify", 0.5, 768, {"models_video"}, {}, false, 1},
  };
  t[TaskClass::kMediaAudio] = {
      {"audio_prep", "audio_prep", 0.5, 512, {"media_store"}, {}, false, 1},
      {"acoustic_infer", "acoustic_infer", 1.0, 1024, {"models_audio"},
       {"acoustic_infer_lite"}, true, 1},
      {"lang_correct", "lang_correct", 0.5, 768, {"models_audio"}, {}, false, 1},
  };
  t[TaskClass::kNavigation] = {
      {"localize", "localize", 0.5, 256, {"maps"}, {}, false, 1},
      {"plan_path", "plan_path", 0.5, 512, {"maps"}, {}, false, 1},
      {"drive_control", "drive_control", 0.25, 256, {}, {}, false, 1},
  };
  t[TaskClass::kManipulation] = {
      {"perceive_scene", "perceive_scene", 1.0, 1024, {"models_vision"}, {}, false, 1},
      {"grasp_plan", "grasp_plan", 0.5, 512, {}, {}, false, 1},
      {"grasp_execute", "grasp_execute", 0.25, 256, {}, {}, false, 1},
  };
  t[TaskClass::kPerception] = {
      {"capture", "capture", 0.25, 256, {"media_store"}, {}, false, 1},
      {"segment", "segment", 1.0, 1024, {"models_vision"}, {"segment_lite"}, true, 1},
      {"fuse", "fuse", 0.5, 512, {}, {}, false, 1},
  };
  t[TaskClass::kMultiRobot] = {
      {"plan_coordination", "plan_coordination", 0.5, 512, {"maps"}, {}, false, 1},
      {"agent_step", "agent_step", 0.5, 512, {"maps"}, {}, true, 2},
      {"merge_results", "merge_results", 0.5, 512, {}, {}, false, 1},
  };
  t[TaskClass::kInspection] = {
      {"patrol_move", "patrol_move", 0.25, 256, {"maps"}, {}, false, 1},
      {"capture_scan", "capture_scan", 0.5, 512, {"media_store"}, {}, false, 1},
      {"analyze_scan", "analyze_scan", 1.0, 1024, {"models_vision"}, {}, false, 1},
      {"report_gen", "report_gen", 0.25, 256, {}, {}, false, 1},
  };
  t[TaskClass::kHri] = {
      {"listen", "listen", 0.25, 256, {}, {}, false, 1},
      {"interpret", "interpret", 0.5, 512, {"models_audio"}, {}, false, 1},
      {"respond", "respond", 0.25, 256, {}, {}, false, 1},
  };
  return t;
}

const std::map<TaskClass, std::vector<StageRule>>& rule_table() {
  static const auto table = build_rule_table();
  return table;
}

}  // namespace

const std::vector<StageRule>& Decomposer::pipeline(TaskClass cls) {
  auto it = rule_table().find(cls);
  if (it == rule_table().end()) {
    throw UnsupportedTaskError(std::string("no decomposition rule for class ") +
                               to_string(cls));
  }
  return it->second;
}

std::vector<std::string> Decomposer::required_images() {
  std::vector<std::string> images;
  for (const auto& [cls, stages] : rule_table()) {
    for (const auto& s : stages) images.push_back(s.image);
  }
  return images;
}

Decomposer::Decomposer(const std::map<std::string, double>& exec_s_by_image) {
  for (const auto& [cls, stages] : rule_table()) {
    for (const auto& s : stages) {
      auto it = exec_s_by_image.find(s.image);
      if (it == exec_s_by_image.end()) {
        throw ConfigError("no duration estimate for image '" + s.image + "'");
      }
      estimates_[{cls, s.name}] = it->second;
    }
  }
}

int Decomposer::fan_out_of(const TaskSpec& spec, const StageRule& stage) const {
  if (!stage.fan_out_capable) return 1;
  int fan = stage.default_fan_out;
  auto it = spec.params.find("fan_out");
  if (it != spec.params.end()) {
    try {
      fan = std::stoi(it->second);
    } catch (const std::exception&) {
      throw ConfigError("task " + spec.task_id + ": fan_out is not an integer: '" +
                        it->second + "'");
    }
    if (fan < 1) throw ConfigError("task " + spec.task_id + ": fan_out must be >= 1");
  }
  return fan;
}

SubtaskDag Decomposer::decompose(const TaskSpec& spec) {
  const auto& stages = pipeline(spec.task_class);
  SubtaskDag dag;
  std::vector<std::vector<std::string>> layer_ids(stages.size());

  for (size_t i = 0; i < stages.size(); ++i) {
    const StageRule& stage = stages[i];
    int fan = fan_out_of(spec, stage);
    for (int k = 0; k < fan; ++k) {
      Subtask st;
      st.subtask_id = spec.task_id + "." + stage.name;
      if (fan > 1) st.subtask_id += "-" + std::to_string(k + 1);
      st.image = stage.image;
      st.cpu = stage.cpu;
      st.mem_mib = stage.mem_mib;
      st.volumes = stage.volumes;
      st.est_duration_s = estimates_.at({spec.task_class, stage.name});
      st.parallel_group = static_cast<int>(i);
      st.hint.preferred_image = stage.image;
      st.hint.compatible_images = stage.compatible_images;
      st.hint.required_volumes = stage.volumes;
      layer_ids[i].push_back(st.subtask_id);
      dag.nodes.push_back(std::move(st));
    }
    if (i > 0) {
      for (const auto& from : layer_ids[i - 1]) {
        for (const auto& to : layer_ids[i]) dag.edges.emplace_back(from, to);
      }
    }
  }

  decomposed_[spec.task_id] = spec.task_class;
  return dag;
}

RoutePath Decomposer::route(const TaskSpec& spec) const {
  const auto& stages = pipeline(spec.task_class);
  int estimated_nodes = 0;
  bool has_fan_out = false;
  for (const auto& stage : stages) {
    int fan = fan_out_of(spec, stage);
    estimated_nodes += fan;
    if (fan > 1) has_fan_out = true;
  }
  if (estimated_nodes <= kFastPathMaxNodes && !has_fan_out) {
    return RoutePath::kFastPath;
  }
  return RoutePath::kLargePath;
}

void Decomposer::record_feedback(const std::string& task_id, TaskOutcome outcome,
                                 const std::map<std::string, double>& observed) {
  auto it = decomposed_.find(task_id);
  if (it == decomposed_.end()) {
    ++unknown_feedback_warnings_;
    return;
  }
  TaskClass cls = it->second;
  if (outcome == TaskOutcome::kFailure) {
    ++failures_[cls];
    return;
  }
  for (const auto& [stage, seconds] : observed) {
    auto est = estimates_.find({cls, stage});
    if (est == estimates_.end()) continue;
    est->second = kFeedbackAlpha * seconds + (1.0 - kFeedbackAlpha) * est->second;
  }
}

double Decomposer::estimate(TaskClass cls, const std::string& stage) const {
  auto it = estimates_.find({cls, stage});
  if (it == estimates_.end()) {
    throw ConfigError(std::string("no estimate for ") + to_string(cls) + "/" + stage);
  }
  return it->second;
}

int Decomposer::failure_count(TaskClass cls) const {
  auto it = failures_.find(cls);
  return it == failures_.end() ? 0 : it->second;
}

// -- model-client boundary ----------------------------------------------------

std::string format_spec_request(const TaskSpec& spec) {
  std::ostringstream out;
  out << spec.task_id << ' ' << to_string(spec.task_class);
  for (const auto& [k, v] : spec.params) out << ' ' << k << '=' << v;
  return out.str();
}

TaskSpec parse_spec_request(const std::string& line) {
  std::istringstream in(line);
  TaskSpec spec;
  std::string cls;
  if (!(in >> spec.task_id >> cls)) {
    throw ConfigError("malformed spec request: '" + line + "'");
  }
  auto parsed = parse_task_class(cls);
  if (!parsed) throw UnsupportedTaskError("unknown task class: '" + cls + "'");
  spec.task_class = *parsed;
  std::string kv;
  while (in >> kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("malformed param (expected key=value): '" + kv + "'");
    }
    spec.params[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (auto it = spec.params.find("deadline_s"); it != spec.params.end()) {
    spec.deadline_s = std::stod(it->second);
  }
  return spec;
}

std::string RuleBackedModelClient::decompose(const std::string& spec_text) {
  TaskSpec spec = parse_spec_request(spec_text);
  SubtaskDag dag = decomposer_.decompose(spec);
  std::ostringstream out;
  write_dag(out, dag);
  return out.str();
}

}  // namespace swiftbot
