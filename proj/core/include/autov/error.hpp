#pragma once

#include <stdexcept>
#include <string>

namespace autov {

// Base of every error raised by the library. kind() is a stable short tag
// used in structured CLI error output.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate-input"; }
};

class StateError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "state"; }
};

class ParseError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parse"; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

class MissingBlobError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "missing-blob"; }
};

class IncompleteGroupError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "incomplete-group"; }
};

class EmptyGroupError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "empty-group"; }
};

class DegenerateGroupError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate-group"; }
};

class DegenerateStatisticsError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate-statistics"; }
};

class NonFiniteLossError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "non-finite-loss"; }
};

class UsageError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "usage"; }
};

class PathError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "path"; }
};

}  // namespace autov
