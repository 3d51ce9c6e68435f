#pragma once

#include <stdexcept>
#include <string>

namespace setmpc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
struct DimensionMismatch : Error {
  using Error::Error;
};

/// An operation that requires a nonempty set received an empty one.
struct EmptySetError : Error {
  using Error::Error;
};

/// A solver stalled or lost numerical accuracy.
struct NumericalFailure : Error {
  using Error::Error;
};

/// Iteration cap reached before convergence.
struct MaxIterationsError : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// Query point lies outside the controller's domain of attraction.
struct OutsideDomain : Error {
  using Error::Error;
};

/// Requested setpoint is not an admissible equilibrium state.
struct SetpointNotEquilibrium : Error {
  using Error::Error;
};

/// Rejection sampling acceptance rate fell below the viability floor.
struct SamplingStalled : Error {
  using Error::Error;
};

/// Malformed configuration or serialized artifact.
struct ConfigError : Error {
  using Error::Error;
};

/// Controller optimization failed inside a closed-loop run.
struct ControllerFailure : Error {
  int step;
  ControllerFailure(const std::string& msg, int failing_step)
      : Error(msg + " (step " + std::to_string(failing_step) + ")"), step(failing_step) {}
};

/// A runtime assertion derived from the controller theory was violated.
struct InvariantViolation : Error {
  using Error::Error;
};

}  // namespace setmpc
