// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/sim/trace.hpp"

#include <sstream>

#include "swiftbot/common/errors.hpp"
#include "swiftbot/common/rng.hpp"
#include "swiftbot/sim/metrics.hpp"

namespace swiftbot {

std::vector<TraceTask> parse_trace(std::istream& in) {
  std::vector<TraceTask> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream fields(line);
    std::string arrival_text, task_id, cls_text;
    if (!(fields >> arrival_text)) continue;  // blank line
    if (!(fields >> task_id >> cls_text)) {
      throw ConfigError("trace line " + std::to_string(line_no) +
                        ": expected 'arrival_time_s task_id task_class [k=v...]'");
    }
    TraceTask task;
    try {
      task.arrival_s = std::stod(arrival_text);
    } catch (const std::exception&) {
      throw ConfigError("trace line " + std::to_string(line_no) +
                        ": bad arrival time '" + arrival_text + "'");
    }
    if (task.arrival_s < 0) {
      throw ConfigError("trace line " + std::to_string(line_no) +
                        ": negative arrival time");
    }
    auto cls = parse_task_class(cls_text);
    if (!cls) {
      throw ConfigError("trace line " + std::to_string(line_no) +
                        ": unknown task class '" + cls_text + "'");
    }
    task.spec.task_id = task_id;
    task.spec.task_class = *cls;
    task.spec.instruction = cls_text;
    std::string kv;
    while (fields >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("trace line " + std::to_string(line_no) +
                          ": expected key=value, got '" + kv + "'");
      }
      task.spec.params[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (auto it = task.spec.params.find("deadline_s"); it != task.spec.params.end()) {
      try {
        task.spec.deadline_s = std::stod(it->second);
      } catch (const std::exception&) {
        throw ConfigError("trace line " + std::to_string(line_no) +
                          ": bad deadline_s '" + it->second + "'");
      }
    }
    out.push_back(std::move(task));
  }
  return out;
}

void write_trace(std::ostream& out, const std::vector<TraceTask>& tasks) {
  for (const auto& t : tasks) {
    out << fmt_fixed(t.arrival_s, 3) << ' ' << t.spec.task_id << ' '
        << to_string(t.spec.task_class);
    for (const auto& [k, v] : t.spec.params) out << ' ' << k << '=' << v;
    out << '\n';
  }
}

std::vector<TraceTask> synth_trace(int count, TaskClass cls, double rate,
                                   uint64_t seed) {
  Rng rng(mix64(seed, fnv1a64(to_string(cls))));
  std::vector<TraceTask> out;
  double t = 0.0;
  for (int i = 0; i < count; ++i) {
    t += rng.exponential(rate);
    TraceTask task;
    task.arrival_s = t;
    task.spec.task_id = std::string(to_string(cls)) + "-" + std::to_string(i + 1);
    task.spec.task_class = cls;
    task.spec.instruction = to_string(cls);
    out.push_back(std::move(task));
  }
  return out;
}

}  // namespace swiftbot
