// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/calibration.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "swiftbot/common/errors.hpp"

namespace swiftbot {

using nlohmann::json;

void Calibration::set(const std::string& image, ImageCosts costs) {
  by_image_[image] = costs;
}

bool Calibration::has(const std::string& image) const {
  return by_image_.count(image) > 0;
}

const ImageCosts& Calibration::at(const std::string& image) const {
  auto it = by_image_.find(image);
  if (it == by_image_.end()) {
    throw ConfigError("image '" + image + "' missing from calibration");
  }
  return it->second;
}

double Calibration::cold_cost(const std::string& image) const {
  const ImageCosts& c = at(image);
  return c.pull_s + c.init_s;
}

double Calibration::handoff(const std::string& image) const {
  return at(image).handoff_s;
}

double Calibration::reuse(const std::string& image) const {
  const ImageCosts& c = at(image);
  return c.reuse_s > 0.0 ? c.reuse_s : 1.5 * c.handoff_s;
}

double Calibration::resume_cost(const std::string& image) const {
  const ImageCosts& c = at(image);
  return c.resume_ratio * (c.pull_s + c.init_s);
}

std::vector<std::string> Calibration::images() const {
  std::vector<std::string> out;
  out.reserve(by_image_.size());
  for (const auto& [image, _] : by_image_) out.push_back(image);
  return out;
}

Calibration Calibration::parse_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("calibration: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("calibration: top level must be an object");

  Calibration cal;
  for (const auto& [image, spec] : j.items()) {
    if (!spec.is_object()) {
      throw ConfigError("calibration: entry for '" + image + "' must be an object");
    }
    ImageCosts c;
    for (const char* key : {"pull_s", "init_s", "handoff_s", "resume_ratio"}) {
      if (!spec.contains(key)) {
        throw ConfigError("calibration: '" + image + "' missing key '" + key + "'");
      }
    }
    c.pull_s = spec.at("pull_s").get<double>();
    c.init_s = spec.at("init_s").get<double>();
    c.handoff_s = spec.at("handoff_s").get<double>();
    c.resume_ratio = spec.at("resume_ratio").get<double>();
    c.reuse_s = spec.value("reuse_s", 0.0);
    c.exec_s = spec.value("exec_s", 0.5);
    c.state_mib = spec.value("state_mib", 25.0);
    cal.set(image, c);
  }
  return cal;
}

Calibration Calibration::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open calibration file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str());
}

Calibration Calibration::defaults() {
  Calibration cal;
  auto add = [&](const std::string& image, double pull, double init, double exec,
                 double state) {
    ImageCosts c;
    c.pull_s = pull;
    c.init_s = init;
    c.handoff_s = 0.12;
    c.reuse_s = 0.18;
    c.resume_ratio = 0.25;
    c.exec_s = exec;
    c.state_mib = state;
    cal.set(image, c);
  };

  // Media pipeline stages: cold 0.65 s, warm handoff 0.12 s, keep-alive
  // reuse 0.18 s.
  add("extract", 0.45, 0.20, 0.30, 16.0);
  add("encode3d", 0.45, 0.20, 0.35, 20.0);
  add("classify", 0.45, 0.20, 0.25, 18.0);
  add("audio_prep", 0.45, 0.20, 0.28, 16.0);
  add("acoustic_infer", 0.45, 0.20, 0.35, 20.0);
  add("lang_correct", 0.45, 0.20, 0.25, 18.0);

  // Robotic domain stages.
  add("localize", 0.30, 0.12, 0.25, 12.0);
  add("plan_path", 0.35, 0.15, 0.40, 14.0);
  add("drive_control", 0.25, 0.10, 0.30, 8.0);
  add("perceive_scene", 0.50, 0.22, 0.45, 22.0);
  add("grasp_plan", 0.35, 0.15, 0.35, 12.0);
  add("grasp_execute", 0.25, 0.10, 0.30, 8.0);
  add("capture", 0.25, 0.10, 0.20, 8.0);
  add("segment", 0.50, 0.22, 0.45, 22.0);
  add("fuse", 0.35, 0.15, 0.30, 12.0);
  add("plan_coordination", 0.35, 0.15, 0.40, 14.0);
  add("agent_step", 0.35, 0.15, 0.45, 14.0);
  add("merge_results", 0.30, 0.12, 0.25, 10.0);
  add("patrol_move", 0.25, 0.10, 0.35, 8.0);
  add("capture_scan", 0.30, 0.12, 0.30, 10.0);
  add("analyze_scan", 0.50, 0.22, 0.50, 22.0);
  add("report_gen", 0.25, 0.10, 0.20, 8.0);
  add("listen", 0.25, 0.10, 0.25, 8.0);
  add("interpret", 0.35, 0.15, 0.35, 14.0);
  add("respond", 0.25, 0.10, 0.25, 8.0);

  return cal;
}

std::map<std::string, double> Calibration::exec_seconds_by_image() const {
  std::map<std::string, double> out;
  for (const auto& [image, costs] : by_image_) out[image] = costs.exec_s;
  return out;
}

}  // namespace swiftbot
