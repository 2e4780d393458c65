#pragma once

#include <stdexcept>
#include <string>

namespace fdkp {

// Bad argument or configuration value supplied by the caller.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A structural invariant of a field or table does not hold.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolverFailure {
  diverged,
  not_converged,
  stalled,
  ball_violation,
  not_projectable,
  geometry_violation,
  wrong_sign_branch,
  quadrature,
};

inline const char* to_string(SolverFailure f) {
  switch (f) {
    case SolverFailure::diverged: return "diverged";
    case SolverFailure::not_converged: return "not_converged";
    case SolverFailure::stalled: return "stalled";
    case SolverFailure::ball_violation: return "ball_violation";
    case SolverFailure::not_projectable: return "not_projectable";
    case SolverFailure::geometry_violation: return "geometry_violation";
    case SolverFailure::wrong_sign_branch: return "wrong_sign_branch";
    case SolverFailure::quadrature: return "quadrature";
  }
  return "unknown";
}

class SolverError : public std::runtime_error {
 public:
  SolverError(SolverFailure kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  SolverFailure kind() const noexcept { return kind_; }

 private:
  SolverFailure kind_;
};

}  // namespace fdkp
