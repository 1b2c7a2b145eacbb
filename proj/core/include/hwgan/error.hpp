#pragma once

#include <stdexcept>
#include <string>

namespace hwgan {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument values: empty inputs, nonpositive steps, length mismatches.
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// Geometry that cannot be processed (e.g. zero-height bounding box).
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// A module precondition was violated (shape contracts, size mismatches).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input documents (XML, interchange lines, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (nonpositive scale constants, negative bias).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Values escaped their numeric domain (probabilities outside (0,1)).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss; carries the step it happened at.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, long step)
      : Error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// Unreadable, truncated or incompatible checkpoint files.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined for the given sample (too few points, zero spacing).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace hwgan
