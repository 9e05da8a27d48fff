#pragma once

#include <stdexcept>
#include <string>

namespace conicxray {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A caller passed an argument outside its admissible range.
struct ArgumentError : Error {
  using Error::Error;
};

/// A point or parameter lies outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

/// A documented precondition (unit covector, matching metric, ...) was violated.
struct ContractViolation : Error {
  using Error::Error;
};

/// The metric has not been certified (foliation / conjugate-point checks).
struct CertificationError : Error {
  using Error::Error;
};

/// A fitted quantity contradicts the convex-foliation hypothesis.
struct FoliationError : Error {
  using Error::Error;
};

/// Adaptive integration failed; carries the last good parameter value.
struct IntegrationError : Error {
  double last_param;
  IntegrationError(const std::string& msg, double param)
      : Error(msg), last_param(param) {}
};

/// A dense object would exceed its configured size cap.
struct SizeError : Error {
  using Error::Error;
};

/// An iterative solver stopped making progress.
struct StagnationError : Error {
  using Error::Error;
};

/// Malformed configuration or data file.
struct FormatError : Error {
  using Error::Error;
};

}  // namespace conicxray
