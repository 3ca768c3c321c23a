#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace marlta {

// Base for every error raised by the library. Callers that only need a
// diagnostic can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input. `line()` is 1-based, 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that describes an impossible structure
// (dangling node reference, duplicate link, disconnected OD pair).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Values outside their documented range (negative demand, zero capacity).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A numeric function evaluated outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition (shape mismatch, off-simplex action).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class UndefinedGapError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Persisted artifact written by an incompatible format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace marlta
