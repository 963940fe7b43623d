#pragma once

#include <stdexcept>
#include <string>

namespace phail {

// Bad parameters in a config or distribution. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An engine would exceed its memory/size budget. CLI exit code 3.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Caller broke a precondition (unsorted input, wrong relation, ...).
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace phail
