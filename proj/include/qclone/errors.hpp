#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qclone {

/// Bad argument or parameter combination (maps to CLI exit code 2).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fock-space truncation could not be made small enough (exit code 3).
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Post-selection on an event of (numerically) zero probability.
class EmptySelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (exit code 4). `line` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// The data cannot determine the requested estimate (exit code 5).
class DegenerateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qclone
