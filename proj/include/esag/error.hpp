#pragma once

#include <stdexcept>
#include <string>

namespace esag {

enum class ErrorKind {
  DimensionTooSmall,
  DegenerateMean,
  ZeroRange,
  DegenerateData,
  DegenerateFit,
  Contract,
  Misuse,
  Ingestion,
  Io,
};

/// Base exception for the library. `kind()` lets callers (the CLI in
/// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace esag
