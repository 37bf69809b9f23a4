#pragma once

#include <stdexcept>
#include <string>

namespace qrem {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested size exceeds what the implementation is prepared to allocate.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Root or minimum could not be bracketed.
class SearchError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise inconsistent numerical result.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Time step too coarse for the requested unitarity.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration; `line` is 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line) : Error(message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace qrem
