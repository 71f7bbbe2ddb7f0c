#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ilse {

// Base of every error the library throws. Callers that only care about
// "something went wrong in ilse" catch this; the CLI maps subclasses to
// exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// NaN/Inf or an undefined quantity (zero-norm cosine) during computation.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelation : public NumericFailure {
 public:
  using NumericFailure::NumericFailure;
};

class SearchFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary file. offset() is the byte position where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace ilse
