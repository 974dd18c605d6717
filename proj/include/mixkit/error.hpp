#pragma once

#include <stdexcept>
#include <string>

namespace mixkit {

/// Bad arguments or violated preconditions (shape mismatch, non-finite input, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File system / format failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A hard constraint could not be met (binning, split assignment, sampling, verification).
class ConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixkit
