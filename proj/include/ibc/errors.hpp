#pragma once

#include <stdexcept>
#include <string>

namespace ibc {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, grids or gauges of the inputs do not fit together.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A physical or family parameter is outside its admissible set.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An operation precondition is violated; `value()` carries the offending
/// quantity (actual norm, IBC residual, distance, ...).
class PreconditionError : public Error {
 public:
  PreconditionError(const std::string& what, double value) : Error(what), value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Iterative method failed to converge; `residual()` is the last residual.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  explicit NumericalError(const std::string& what) : Error(what), residual_(0.0) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Requested problem would exceed the configured memory cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace ibc
