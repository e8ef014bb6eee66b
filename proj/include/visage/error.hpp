#pragma once

#include <stdexcept>
#include <string>

namespace visage {

enum class ErrorKind {
  InvalidInput,
  Bounds,
  DegenerateTraining,
  EmptyTraining,
  Parse,
  UnsupportedKernel,
  InvalidSpec,
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Bounds: return "bounds";
    case ErrorKind::DegenerateTraining: return "degenerate-training";
    case ErrorKind::EmptyTraining: return "empty-training";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::UnsupportedKernel: return "unsupported-kernel";
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// All library failures are reported through this one exception type; the
// kind lets callers (CLI exit codes, HTTP status) map them without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse errors carry the 1-based line number they were raised on.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace visage
