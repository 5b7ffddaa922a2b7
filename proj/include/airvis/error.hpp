#pragma once

#include <stdexcept>
#include <string>

namespace airvis {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (grid files, GCP files, pose files, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (rank deficiency, divergence, degenerate geometry).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A world point projects at or behind the image plane.
class BehindCamera : public NumericError {
 public:
  using NumericError::NumericError;
};

/// No pixel is both visible and has a valid depth.
class NoVisibleSurface : public Error {
 public:
  using Error::Error;
};

}  // namespace airvis
