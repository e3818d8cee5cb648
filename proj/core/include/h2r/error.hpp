#pragma once

#include <stdexcept>
#include <string>

namespace h2r {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Poses or data tagged with an unexpected coordinate frame.
class FrameMismatch : public Error {
 public:
  using Error::Error;
};

// Geometrically degenerate input (collinear points, zero depth, rank loss).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or wrong-version files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Episode or dataset content that violates an invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace h2r
