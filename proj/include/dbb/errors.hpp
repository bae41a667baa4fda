#pragma once

#include <stdexcept>
#include <string>

namespace dbb {

/// Base class of all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Velocity (or a quantity derived from it) requested where the density is
/// at or below the density floor.
struct NodalPointError : Error {
  explicit NodalPointError(const std::string& msg) : Error(msg) {}
};

/// Adaptive step size underflowed.
struct StepFailureError : Error {
  explicit StepFailureError(const std::string& msg) : Error(msg) {}
};

/// Rejection-sampling acceptance rate collapsed (badly chosen box).
struct SamplingBoxError : Error {
  explicit SamplingBoxError(const std::string& msg) : Error(msg) {}
};

/// Initial wave-packet supports overlap where disjointness is required.
struct OverlapError : Error {
  explicit OverlapError(const std::string& msg) : Error(msg) {}
};

/// An operation precondition was violated.
struct PreconditionError : Error {
  explicit PreconditionError(const std::string& msg) : Error(msg) {}
};

/// A quadrature did not converge to the requested tolerance.
struct QuadratureError : Error {
  explicit QuadratureError(const std::string& msg) : Error(msg) {}
};

/// A scenario file failed schema validation.
struct SchemaError : Error {
  explicit SchemaError(const std::string& msg) : Error(msg) {}
};

}  // namespace dbb
