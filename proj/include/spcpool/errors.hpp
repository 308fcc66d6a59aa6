#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spcpool {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or invalid-argument failures.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Estimator called with fewer observations than it needs.
class InsufficientDataError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Input file header does not match the requested schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A data row failed to parse; carries the 1-based line number.
class RowError : public Error {
 public:
  RowError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateKeyError : public Error {
 public:
  using Error::Error;
};

// Control limits cannot be formed (e.g. all moving ranges are zero).
class DegenerateLimitsError : public Error {
 public:
  using Error::Error;
};

}  // namespace spcpool
