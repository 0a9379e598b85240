#pragma once

#include <stdexcept>
#include <string>

namespace riskdrive {

// Scenario cannot be spawned on the configured road.
class InfeasibleScenario : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation called in the wrong lifecycle phase (step after done,
// backward without a forward pass, ...).
class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidManeuver : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientHistory : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Configuration problem; `path` names the offending field ("scenario.dt").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace riskdrive
