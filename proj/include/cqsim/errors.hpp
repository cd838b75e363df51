#pragma once

#include <stdexcept>
#include <string>

namespace cqsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands of incompatible dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or an inadmissible theory (bad family parameters,
/// non-Hermitian G, failed martingale constraint, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The state left the support of the measure: g(x) == 0, so the force is
/// undefined.
class MeasureSupportError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or an unstable discretisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A Monte Carlo run that cannot support a conclusion (too few collapsed
/// trajectories, empty ensemble, degenerate weights).
class InconclusiveRun : public Error {
 public:
  using Error::Error;
};

/// Error raised inside a trajectory, carrying the simulation time of the
/// failing step.
class StepError : public Error {
 public:
  enum class Cause { MeasureSupport, NonFinite };

  StepError(Cause cause, const std::string& what, double time)
      : Error(what + " (t=" + std::to_string(time) + ")"), cause_(cause), time_(time) {}
  Cause cause() const noexcept { return cause_; }
  double time() const noexcept { return time_; }

 private:
  Cause cause_;
  double time_;
};

}  // namespace cqsim
