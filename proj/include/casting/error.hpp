#pragma once

#include <stdexcept>
#include <string>

namespace casting {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A cable or tether was asked to push (negative force).
class UnilateralInputError : public Error {
 public:
  explicit UnilateralInputError(const std::string& what)
      : Error("unilateral input violation: " + what) {}
};

/// A direction was requested between two coincident points.
class DegenerateGeometryError : public Error {
 public:
  explicit DegenerateGeometryError(const std::string& what)
      : Error("degenerate geometry: " + what) {}
};

class IntegrationDivergedError : public Error {
 public:
  explicit IntegrationDivergedError(const std::string& what)
      : Error("integration diverged: " + what) {}
};

/// b21 vanished, so the outputs (q2, q3) cannot be decoupled.
class SingularDecouplingError : public Error {
 public:
  explicit SingularDecouplingError(const std::string& what)
      : Error("singular decoupling: " + what) {}
};

class NeverLandsError : public Error {
 public:
  explicit NeverLandsError(const std::string& what)
      : Error("ballistic flight never reaches the ground: " + what) {}
};

class DegenerateConfigurationError : public Error {
 public:
  explicit DegenerateConfigurationError(const std::string& what)
      : Error("degenerate configuration: " + what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("validation error: " + what) {}
};

}  // namespace casting
