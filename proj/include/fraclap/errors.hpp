#pragma once

#include <stdexcept>
#include <string>

namespace fraclap {

/// Raised when an input violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation would exceed a configured size cap.
class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterative method loses positive definiteness.
class NumericBreakdown : public std::runtime_error {
 public:
  NumericBreakdown(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace fraclap
