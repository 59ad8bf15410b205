#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scusum {

/// Base of every error raised by the library. Subclasses map onto the CLI's
/// exit-code classes (usage, parse, numeric, I/O).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (bad argument, empty input).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Vector dimensions disagree with the model or with each other.
class DimensionError : public UsageError {
 public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
      : UsageError(what + ": expected dimension " + std::to_string(expected) + ", got " +
                   std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// A bound or inequality was evaluated outside its validity region.
class DomainError : public UsageError {
 public:
  using UsageError::UsageError;
};

/// Malformed text input. Carries the 1-based line number when known (0
/// otherwise) and, optionally, the file it came from.
class ParseError : public Error {
 public:
  ParseError(const std::string& detail, std::size_t line = 0, const std::string& source = {})
      : Error(compose(detail, line, source)), detail_(detail), line_(line), source_(source) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::string& source() const noexcept { return source_; }

 private:
  static std::string compose(const std::string& detail, std::size_t line, const std::string& source) {
    std::string out = source.empty() ? std::string{} : source + ": ";
    if (line) out += "line " + std::to_string(line) + ": ";
    return out + detail;
  }

  std::string detail_;
  std::size_t line_;
  std::string source_;
};

/// Well-formed tokens arranged in an inconsistent structure.
class StructureError : public ParseError {
 public:
  using ParseError::ParseError;
};

class FrameSequenceError : public StructureError {
 public:
  using StructureError::StructureError;
};

class BoneMismatchError : public StructureError {
 public:
  using StructureError::StructureError;
};

/// NaN/Inf appeared where a finite number is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : NumericError("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scusum
