#pragma once

#include <stdexcept>
#include <string>

namespace gtcnn {

/// Caller passed arguments that violate an operation's preconditions.
class ParameterError : public std::invalid_argument {
public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// A type invariant or inter-module contract was violated (programming error).
class ContractError : public std::logic_error {
public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// A numerical routine failed to produce a usable result.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// The requested quantity is undefined for this input (e.g. zero filter).
class DegenerateError : public std::runtime_error {
public:
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

/// Experiment configuration is invalid or inconsistent.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// File could not be read, written, or parsed.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gtcnn
