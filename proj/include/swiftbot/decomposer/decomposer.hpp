// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "swiftbot/decomposer/task.hpp"

namespace swiftbot {

enum class RoutePath { kFastPath, kLargePath };
enum class TaskOutcome { kSuccess, kFailure };

class UnsupportedTaskError : public std::runtime_error {
 public:
  explicit UnsupportedTaskError(const std::string& what)
      : std::runtime_error(what) {}
};

/// One pipeline stage in the rule table.
struct StageRule {
  std::string name;
  std::string image;
  double cpu = 0.5;
  double mem_mib = 512;
  std::set<std::string> volumes;
  std::set<std::string> compatible_images;
  bool fan_out_capable = false;
  int default_fan_out = 1;
};

/// Deterministic rule-based decomposition keyed on task class, fronted by a
/// cascade router: small sequential plans stay on the fast path, anything
/// with fan-out or more than three stages is routed to the large path.
class Decomposer {
 public:
  /// `exec_s_by_image` seeds the per-stage duration estimates; every image in
  /// required_images() must be present.
  explicit Decomposer(const std::map<std::string, double>& exec_s_by_image);

  SubtaskDag decompose(const TaskSpec& spec);
  RoutePath route(const TaskSpec& spec) const;

  /// EWMA update (alpha = 0.3) of per-(class, stage) duration estimates.
  /// Failures leave estimates untouched and bump the failure counter.
  void record_feedback(const std::string& task_id, TaskOutcome outcome,
                       const std::map<std::string, double>& observed_durations);

  double estimate(TaskClass cls, const std::string& stage) const;
  int failure_count(TaskClass cls) const;
  size_t unknown_feedback_warnings() const { return unknown_feedback_warnings_; }

  static const std::vector<StageRule>& pipeline(TaskClass cls);
  static std::vector<std::string> required_images();

  static constexpr double kFeedbackAlpha = 0.3;
  static constexpr int kFastPathMaxNodes = 3;

 private:
  int fan_out_of(const TaskSpec& spec, const StageRule& stage) const;

  std::map<std::pair<TaskClass, std::string>, double> estimates_;
  std::map<TaskClass, int> failures_;
  std::map<std::string, TaskClass> decomposed_;  // task_id -> class
  size_t unknown_feedback_warnings_ = 0;
};

/// Boundary for plugging a remote decomposition backend: the request is the
/// task-spec text, the response is a DAG in the exchange format
/// (see dag_format.hpp).
class ExternalModelClient {
 public:
  virtual ~ExternalModelClient() = default;
  virtual std::string decompose(const std::string& spec_text) = 0;
};

/// Ships as the only backend: parses the spec text and answers from the
/// local rule engine.
class RuleBackedModelClient : public ExternalModelClient {
 public:
  explicit RuleBackedModelClient(Decomposer& decomposer) : decomposer_(decomposer) {}
  std::string decompose(const std::string& spec_text) override;

 private:
  Decomposer& decomposer_;
};

/// "task_id class key=value ..." round-trip for the model-client boundary.
std::string format_spec_request(const TaskSpec& spec);
TaskSpec parse_spec_request(const std::string& line);

}  // namespace swiftbot
