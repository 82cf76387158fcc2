#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace handsoff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// model
class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

// solver
class DegenerateProgram : public Error {
 public:
  using Error::Error;
};

class UnboundedSearch : public Error {
 public:
  using Error::Error;
};

class ComplexityGuard : public Error {
 public:
  using Error::Error;
};

// codec
class StructureViolation : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Any malformed packet. Subclasses narrow down what was wrong.
class PacketError : public Error {
 public:
  using Error::Error;
};

class FormatError : public PacketError {
 public:
  using PacketError::PacketError;
};

class ReservedCode : public PacketError {
 public:
  using PacketError::PacketError;
};

class LengthError : public PacketError {
 public:
  using PacketError::PacketError;
};

class CorruptionError : public PacketError {
 public:
  using PacketError::PacketError;
};

// netsim
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t horizon, double norm)
      : Error("state diverged at horizon " + std::to_string(horizon) +
              " (|x| = " + std::to_string(norm) + ")"),
        horizon_(horizon) {}

  std::size_t horizon() const noexcept { return horizon_; }

 private:
  std::size_t horizon_;
};

}  // namespace handsoff
