#pragma once

#include <stdexcept>
#include <string>

namespace echostrain {

// Process exit codes used by the CLI. Library code throws the typed
// exceptions below; the CLI maps them onto these codes.
enum class ExitCode : int {
  Ok = 0,
  Internal = 1,
  Validation = 2,
  Io = 3,
  Format = 4,
  Stale = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad configuration values, violated type invariants, precondition failures.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ExitCode::Validation, what) {}
};

// Degenerate or inconsistent geometry (zero wall, wall too short for segments, ...).
class GeometryError : public ValidationError {
 public:
  explicit GeometryError(const std::string& what) : ValidationError(what) {}
};

// Mismatched container shapes (endo/epi counts, mesh sequence shapes, ...).
class StructuralError : public ValidationError {
 public:
  explicit StructuralError(const std::string& what) : ValidationError(what) {}
};

// Index ranges outside a container.
class BoundsError : public ValidationError {
 public:
  explicit BoundsError(const std::string& what) : ValidationError(what) {}
};

// A frame sequence is incomplete (missing displacement field, empty sequence).
class SequenceError : public ValidationError {
 public:
  explicit SequenceError(const std::string& what) : ValidationError(what) {}
};

// Not enough data for a statistic (fewer than 2 Bland-Altman pairs).
class InsufficientDataError : public ValidationError {
 public:
  explicit InsufficientDataError(const std::string& what) : ValidationError(what) {}
};

/// Filesystem failures: unreadable/unwritable paths.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::Io, what) {}
};

/// Malformed file contents: bad magic, version, dimensions, non-finite records.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ExitCode::Format, what) {}
};

// An artifact no longer matches the manifest hash it was produced from.
class StaleArtifactError : public Error {
 public:
  explicit StaleArtifactError(const std::string& what) : Error(ExitCode::Stale, what) {}
};

}  // namespace echostrain
