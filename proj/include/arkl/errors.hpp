#pragma once

#include <stdexcept>
#include <string>

namespace arkl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or input is outside its documented domain.
class InvalidParam : public Error {
 public:
  using Error::Error;
};

/// A log-probability of an observed token is -inf.
class ZeroProbability : public Error {
 public:
  using Error::Error;
};

/// An exact enumeration would exceed the configured state cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// P(S) > 0 where Q(S) = 0 in a divergence that requires absolute continuity.
class SupportViolation : public Error {
 public:
  using Error::Error;
};

/// A log-density ratio is +inf.
class Unbounded : public Error {
 public:
  using Error::Error;
};

}  // namespace arkl
