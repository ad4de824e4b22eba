#pragma once

#include <stdexcept>
#include <string>

namespace zsner {

// Error families map one-to-one onto CLI exit codes (see tools/cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration: invalid values, alias chains, missing env vars.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Corrupt or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// The LLM endpoint could not be reached or answered with a non-2xx status.
class TransportError : public Error {
 public:
  using Error::Error;
};

// A model response (or a record) did not satisfy a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace zsner
