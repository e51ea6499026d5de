#pragma once

#include <stdexcept>
#include <string>

namespace meshssm {

// Error categories map onto CLI exit codes: ValidationError/ParseError/DimensionError
// are input problems (2), NumericError and IoError are runtime failures (3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace meshssm
