#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace collabnet {

/// Raised when a configuration value fails validation. The message names
/// the offending field; `field()` carries its dotted path.
class config_error : public std::invalid_argument {
 public:
  config_error(std::string field, const std::string& message)
      : std::invalid_argument(message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed configuration text. `line` is 1-based, 0 when unknown.
class parse_error : public std::runtime_error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace collabnet
