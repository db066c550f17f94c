#pragma once

#include <stdexcept>
#include <string>

namespace randten {

// Base of everything the library throws on contract violations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An entry lies outside the l1 box |n| <= N.
class SupportBoundError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

// A configured size cap (partition labels, dense matricization side) was exceeded.
class CapExceededError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace randten
