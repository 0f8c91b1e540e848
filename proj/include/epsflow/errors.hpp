#pragma once

#include <stdexcept>
#include <string>

namespace epsflow {

/// Base class for all failures raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The curve is not resolved on its grid (spectral tail too heavy, degenerate
/// metric, or non-finite values).
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// A circle solution was requested at or beyond its extinction time.
class ExtinctionError : public Error {
 public:
  using Error::Error;
};

/// A reference flow hit a singularity before the requested time.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Audit preconditions were violated (e.g. a reparametrization inside the
/// differencing window).
class AuditError : public Error {
 public:
  using Error::Error;
};

}  // namespace epsflow
