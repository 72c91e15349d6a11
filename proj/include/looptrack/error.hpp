#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace looptrack {

/// Failure categories shared by every module. The CLI maps them to exit codes.
enum class ErrorKind {
  InvalidInput,
  Precondition,
  DegenerateGeometry,
  DegenerateMotion,
  StraightLine,
  Singularity,
  NumericalFailure,
  AlignmentFailure,
  IncompleteLoop,
  InvalidInitialization,
  Configuration,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace looptrack
