#pragma once

#include <stdexcept>
#include <string>

namespace metaoed {

// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Theta-block of a covariance is singular or too ill-conditioned to condition on.
class DegenerateConditioning : public Error {
 public:
  using Error::Error;
};

// Importance weights collapsed (effective sample size below 2).
class ResampleRequired : public Error {
 public:
  using Error::Error;
};

class BoundUndefined : public Error {
 public:
  using Error::Error;
};

class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

class SelectionFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace metaoed
