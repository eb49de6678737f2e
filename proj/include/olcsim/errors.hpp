#pragma once

#include <stdexcept>
#include <string>

namespace olcsim {

/// Input file is missing or is not parseable JSON.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario JSON violates the documented schema (bad shape, type, or key).
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A semantic invariant of the model is violated (network, cost, config).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal numerical failure that valid inputs should never trigger.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite state encountered while integrating.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Output file or stream could not be written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace olcsim
