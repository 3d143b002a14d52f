#pragma once

#include <stdexcept>
#include <string>

namespace ppstat {

/// Bad or inconsistent run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// File cannot be opened, read or written (CLI exit code 3).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed content in a data file (CLI exit code 3).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: factorization breakdown, invalid model values,
/// degenerate Monte Carlo denominators (CLI exit code 4).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ppstat
