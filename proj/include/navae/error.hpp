// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_ERROR_HPP_
#define NAVAE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace navae {

// Base of all library errors. The CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, bad configuration, missing prerequisite stage.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed files, unsupported audio formats.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values in losses, gradients or parameter updates.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace navae

#endif  // NAVAE_ERROR_HPP_
