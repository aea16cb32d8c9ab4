#ifndef MTXPLAIN_ERROR_H_
#define MTXPLAIN_ERROR_H_

#include <stdexcept>
#include <string>

namespace mtx {

// Errors fall into two families. Validation errors are caused by bad input
// (files, flags, configuration) and map to CLI exit code 1; everything else
// is a runtime failure and maps to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual bool is_validation() const { return false; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
  bool is_validation() const override { return true; }
};

// Tensor shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a numerical routine that cannot produce a result.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of an API, e.g. backward() on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Unreadable or malformed input files.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Dataset records that violate the schema. Carries the 1-based line number.
class SchemaError : public ValidationError {
 public:
  SchemaError(size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

class DataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class CheckpointError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace mtx

#endif  // MTXPLAIN_ERROR_H_
