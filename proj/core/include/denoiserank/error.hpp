#pragma once

#include <stdexcept>
#include <string>

namespace denoiserank {

// Root of every exception thrown by the library. Subclasses group failures by
// how a caller is expected to react (fix input data, fix configuration, stop a
// numeric run) so the command-line tool can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data problems: malformed LETOR lines, labels out of range, empty files.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDatasetError : public DataError {
 public:
  using DataError::DataError;
};

// Binary cache or checkpoint written by another format version / config.
class IncompatibleError : public DataError {
 public:
  using DataError::DataError;
};

// Truncated or otherwise damaged binary file.
class CorruptionError : public DataError {
 public:
  using DataError::DataError;
};

// Configuration errors: unknown keys, out-of-range hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Programming-contract violations (bad shapes, indices out of range, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IndexError : public ContractError {
 public:
  using ContractError::ContractError;
};

class DomainError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Non-finite loss or metric during a numeric run.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace denoiserank
