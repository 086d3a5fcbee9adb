#include "nscl/errors.hpp"

namespace nscl {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::shape: return "shape";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::verification: return "verification";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 1;
    case ErrorKind::data:
    case ErrorKind::lookup: return 2;
    case ErrorKind::numeric:
    case ErrorKind::shape: return 3;
    case ErrorKind::verification: return 4;
  }
  return 3;
}

void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string message = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::config: throw ConfigError(message);
    case ErrorKind::data: throw DataError(message);
    case ErrorKind::numeric: throw NumericError(message);
    case ErrorKind::shape: throw ShapeError(message);
    case ErrorKind::lookup: throw LookupError(message);
    case ErrorKind::verification: throw VerificationError(message);
  }
  throw Error(e.kind(), message);
}

}  // namespace nscl
