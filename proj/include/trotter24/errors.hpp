#pragma once

#include <stdexcept>
#include <string>

namespace trotter24 {

/// Raised when a dense (2^L x 2^L) construction is requested above the configured site limit.
class DimensionLimitError : public std::runtime_error {
 public:
  DimensionLimitError(int num_sites, int limit)
      : std::runtime_error("dense construction with " + std::to_string(num_sites) +
                           " sites exceeds the dense limit of " + std::to_string(limit)),
        num_sites_(num_sites),
        limit_(limit) {}

  int num_sites() const noexcept { return num_sites_; }
  int limit() const noexcept { return limit_; }

 private:
  int num_sites_;
  int limit_;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The time-dependent fourth-order formula divides by the integrated B modulation.
class DegenerateFormulaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive controller gave up; carries the index of the step that could not be accepted.
class ControllerAbort : public std::runtime_error {
 public:
  ControllerAbort(const std::string& what, int step_index)
      : std::runtime_error(what + " (step " + std::to_string(step_index) + ")"),
        step_index_(step_index) {}

  int step_index() const noexcept { return step_index_; }

 private:
  int step_index_;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace trotter24
