#pragma once

#include <stdexcept>
#include <string>

namespace confix {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, unreadable, unwritable, or malformed on disk.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented invariant (non-finite values, bad shapes).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a precondition of an API (mismatched buffers, wrong view kind).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace confix
