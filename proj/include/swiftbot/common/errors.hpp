// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <stdexcept>
#include <string>

namespace swiftbot {

/// Malformed or inconsistent configuration (missing calibration entry,
/// unknown image, bad bandwidth map, ...). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A runtime invariant the engine promises to uphold was violated.
/// Carries the invariant name so the CLI can surface it. Exit code 3.
class InvariantViolation : public std::runtime_error {
 public:
  InvariantViolation(std::string name, const std::string& detail)
      : std::runtime_error(name + ": " + detail), name_(std::move(name)) {}

  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

}  // namespace swiftbot
