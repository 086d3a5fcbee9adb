#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nscl {

enum class ErrorKind {
  config,
  data,
  numeric,
  shape,
  lookup,
  verification,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Process exit code for an error kind: 1 config, 2 data, 3 numeric, 4 verification.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

/// Malformed input file. `position` is a 1-based line number for text formats
/// and a byte offset for binary formats.
class ParseError : public DataError {
 public:
  ParseError(const std::string& message, std::uint64_t position)
      : DataError(message + " (at " + std::to_string(position) + ")"), position_(position) {}

  std::uint64_t position() const noexcept { return position_; }

 private:
  std::uint64_t position_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error(ErrorKind::numeric, message) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error(ErrorKind::shape, message) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& message) : Error(ErrorKind::lookup, message) {}
};

class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& message)
      : Error(ErrorKind::verification, message) {}
};

/// Rethrows `e` as the same error kind with `context` prepended to the message.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

}  // namespace nscl
