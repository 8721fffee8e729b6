#pragma once

#include <stdexcept>
#include <string>

namespace tsnescope {

// Broad failure classes. The service maps them onto HTTP statuses and the
// CLI onto exit codes.
enum class ErrorKind {
  validation,   // caller supplied something that breaks a documented precondition
  computation,  // numerics failed (non-convergence, overflow, degenerate input)
  not_found,
  conflict,
  io,
  migration,    // persisted data written by an incompatible format version
  corrupted,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation_error";
    case ErrorKind::computation: return "computation_error";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::io: return "io_error";
    case ErrorKind::migration: return "migration_error";
    case ErrorKind::corrupted: return "corrupted_data";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::validation, message);
}

}  // namespace tsnescope
