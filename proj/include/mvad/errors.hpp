#pragma once

#include <stdexcept>
#include <string>

namespace mvad {

// Input or configuration problem, detected before any output is written.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure at run time: divergence, non-finite values, iteration caps.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure: missing input, unreadable or unwritable path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mvad
