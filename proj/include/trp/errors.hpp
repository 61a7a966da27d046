#pragma once

#include <stdexcept>
#include <string>

namespace trp {

/// Base class for all numerical and data errors raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A matrix that must be full rank is rank deficient under the working
/// tolerance (smallest singular value below 1e-12 times the largest).
struct RankError : Error {
  using Error::Error;
};

/// A linear system's matrix is singular; the message names the offending
/// condition.
struct SingularError : Error {
  using Error::Error;
};

/// A matrix required to be positive definite is not.
struct NotPositiveDefiniteError : Error {
  using Error::Error;
};

/// An iterative procedure hit its iteration cap without converging.
struct ConvergenceError : Error {
  using Error::Error;
};

/// A step size violated its stability bound or caused divergence.
struct StepSizeError : Error {
  using Error::Error;
};

/// Input data degenerate for the requested operation (zero-variation
/// responses, empty designs, non-positive scale sums).
struct DegenerateDataError : Error {
  using Error::Error;
};

/// Malformed file content; the message includes row and column context.
struct ParseError : Error {
  using Error::Error;
};

/// A file could not be opened or written.
struct IoError : Error {
  using Error::Error;
};

/// Mismatched or out-of-range dimensions between inputs.
struct DimensionError : Error {
  using Error::Error;
};

}  // namespace trp
