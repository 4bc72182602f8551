#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ictext {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates the precondition of the operation it was passed to.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A head vector or feature grid has an unsupported shape.
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number (0 when the
/// failure is not tied to a line, e.g. a whole-document JSON file).
class ParseError : public Error {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what);

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A value cannot be written in canonical form (e.g. NaN in a report).
class SerializationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ictext
