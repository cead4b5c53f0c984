#pragma once

#include <stdexcept>
#include <string>

namespace strokeforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments or violated preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File-system and format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or otherwise diverged.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace strokeforge
