#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes or axes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied configuration (bad kernel size, bad sweep list, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data is unusable (empty corpus, out-of-range token id, bad file).
class DataError : public Error {
 public:
  using Error::Error;
};

// Wire/layout mismatch when decoding frames or parsing result files.
class FramingError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: NaN loss, zero-power frame, degenerate channel gain.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// API misuse that violates a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure with the offending path in the message.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace semcom
