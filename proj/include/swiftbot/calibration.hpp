// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <map>
#include <string>
#include <vector>

namespace swiftbot {

/// Per-image cost model. pull_s/init_s/handoff_s/resume_ratio are required
/// in calibration files; the rest default sensibly when omitted:
///   reuse_s    — keep-alive reuse latency of the local-pool-only baseline
///   exec_s     — execution-time seed for decomposer estimates
///   state_mib  — serializable state a warm container carries (drives
///                migration cost)
struct ImageCosts {
  double pull_s = 0.0;
  double init_s = 0.0;
  double handoff_s = 0.0;
  double resume_ratio = 0.25;
  double reuse_s = 0.0;     // 0 → defaults to 1.5x handoff_s
  double exec_s = 0.5;
  double state_mib = 25.0;
};

class Calibration {
 public:
  void set(const std::string& image, ImageCosts costs);
  bool has(const std::string& image) const;
  const ImageCosts& at(const std::string& image) const;  // ConfigError if unknown

  /// Pull plus initialization from scratch.
  double cold_cost(const std::string& image) const;
  double handoff(const std::string& image) const;
  double reuse(const std::string& image) const;
  double resume_cost(const std::string& image) const;

  std::vector<std::string> images() const;

  /// Parses the calibration file: a JSON object keyed by image name, each
  /// value an object of the keys above.
  static Calibration parse_json_text(const std::string& text);
  static Calibration load_file(const std::string& path);

  /// Shipped defaults covering every rule-table image; media stages carry
  /// the measured constants (cold 0.65 s, warm handoff 0.12 s, local reuse
  /// 0.18 s).
  static Calibration defaults();

  std::map<std::string, double> exec_seconds_by_image() const;

 private:
  std::map<std::string, ImageCosts> by_image_;
};

}  // namespace swiftbot
