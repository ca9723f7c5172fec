#pragma once

#include <stdexcept>
#include <string>

namespace vaoi {

/// Invalid configuration values (rates, schedule endpoints, budgets, ...).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A call-site argument is out of range or has the wrong shape.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// The object is not in a state that allows the call (e.g. sampling an empty buffer).
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

/// A numerical procedure failed (singular system, no convergence).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vaoi
