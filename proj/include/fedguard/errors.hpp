#pragma once

#include <stdexcept>
#include <string>

namespace fedguard {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDictionary : public Error { using Error::Error; };
class InvalidInput : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class DivisionByZero : public Error { using Error::Error; };
class InvalidSpec : public Error { using Error::Error; };

class CorruptDataset : public Error { using Error::Error; };
class CorruptWeights : public Error { using Error::Error; };

// Wire protocol failures.
class ProtocolError : public Error { using Error::Error; };
class CorruptionError : public ProtocolError { using ProtocolError::ProtocolError; };
class TruncationError : public ProtocolError { using ProtocolError::ProtocolError; };

class AggregationError : public Error { using Error::Error; };
class TransportError : public Error { using Error::Error; };
class TimeoutError : public TransportError { using TransportError::TransportError; };
class IoError : public Error { using Error::Error; };

/// Raised by the config parser; the message names the offending line.
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : Error("config line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace fedguard
