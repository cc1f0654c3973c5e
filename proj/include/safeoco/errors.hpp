#pragma once

#include <stdexcept>
#include <string>

namespace safeoco {

/// Bad argument values or dimension mismatches.
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent external data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unparseable text input; carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, long line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Bad or contradictory run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No feasible point could be found; carries the best slack seen.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double best_slack)
      : std::runtime_error(what + " (best slack " + std::to_string(best_slack) + ")"),
        best_slack_(best_slack) {}
  double best_slack() const { return best_slack_; }

 private:
  double best_slack_;
};

/// Iteration limit hit before reaching the requested tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace safeoco
