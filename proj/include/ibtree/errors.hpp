#pragma once

#include <stdexcept>
#include <string>

namespace ibtree {

// Caller handed us something outside an operation's domain (bad action index,
// malformed config value, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An internal invariant no longer holds. Seeing one of these is a bug.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed document (tree JSON, config file). The message carries the
// location as a JSON pointer.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& location, const std::string& what)
      : std::runtime_error(location.empty() ? what : "at " + location + ": " + what),
        location_(location) {}

  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

}  // namespace ibtree
