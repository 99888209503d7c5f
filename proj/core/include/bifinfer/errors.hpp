#pragma once

#include <stdexcept>
#include <string>

namespace bifinfer {

/// Base of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed inconsistent dimensions or an unsupported option.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// The model's right-hand side or one of its derivatives was not finite.
class ModelEvaluationError : public Error {
 public:
  using Error::Error;
};

/// The steady-state Jacobian lost rank where a tangent or normal was needed.
class DegenerateGeometryError : public Error {
 public:
  DegenerateGeometryError(const std::string& what, long sample = -1) : Error(what), sample_(sample) {}
  long sample() const { return sample_; }

 private:
  long sample_;
};

/// Newton corrector did not converge.
class CorrectorError : public Error {
 public:
  CorrectorError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A bordered or extended Newton system was singular.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Refinement of a bifurcation on the extended system failed.
class RefinementError : public Error {
 public:
  using Error::Error;
};

/// The extended-system Jacobian is singular, so dp/dtheta does not exist.
class DegenerateSensitivityError : public Error {
 public:
  using Error::Error;
};

/// The total measure is undefined (empty diagram).
class UndefinedMeasureError : public Error {
 public:
  using Error::Error;
};

/// Oracle relation evaluated outside of its domain.
class OracleDomainError : public Error {
 public:
  using Error::Error;
};

/// Input data (a diagram file, a config) could not be parsed.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace bifinfer
