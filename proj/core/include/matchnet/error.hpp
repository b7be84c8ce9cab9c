#pragma once

#include <stdexcept>
#include <string>

namespace matchnet {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  Validation = 1,
  Numeric = 2,
  Io = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::Validation, what) {}
};

/// Raised when a brute-force enumeration would exceed its configured cap.
class EnumerationOverflow : public ValidationError {
 public:
  explicit EnumerationOverflow(const std::string& what)
      : ValidationError(what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::Numeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace matchnet
