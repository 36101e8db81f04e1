#pragma once

#include <stdexcept>
#include <string>

namespace conad {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (log of <= 0 ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition (non-scalar backward root, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered during training or scoring.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace conad
