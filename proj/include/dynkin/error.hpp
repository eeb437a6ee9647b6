#pragma once

#include <stdexcept>
#include <string>

namespace dynkin {

/// Input that violates a documented precondition (lengths, schedules, barrier ordering).
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Model or run configuration that cannot be honoured (e.g. lattice probability outside (0,1)).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Argument outside the domain where a closed form applies.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace dynkin
