#include "ictext/errors.hpp"

namespace ictext {

namespace {

std::string format_parse_message(const std::string& path, std::size_t line,
                                 const std::string& what) {
  if (line == 0) return path + ": " + what;
  return path + ":" + std::to_string(line) + ": " + what;
}

}  // namespace

ParseError::ParseError(std::string path, std::size_t line, const std::string& what)
    : Error(format_parse_message(path, line, what)), path_(std::move(path)), line_(line) {}

}  // namespace ictext
