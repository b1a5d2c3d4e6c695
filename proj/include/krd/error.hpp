#pragma once

#include <stdexcept>
#include <string>

namespace krd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument or configuration outside its contract.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A required file is missing or unreadable.
class LoadError : public Error {
 public:
  using Error::Error;
};

// File content violates the bundle / checkpoint format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or activation during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long epoch = -1)
      : Error(what), epoch_(epoch) {}
  long epoch() const noexcept { return epoch_; }

 private:
  long epoch_;
};

// Curve fit could not be performed (e.g. empty histogram).
class FitError : public Error {
 public:
  using Error::Error;
};

// Activation cache does not belong to the current parameters.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace krd
