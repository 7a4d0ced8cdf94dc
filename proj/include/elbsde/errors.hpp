#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elbsde {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model or configuration field failed validation.
class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(std::string field, const std::string& why = "")
      : Error("invariant violated for '" + field + "'" + (why.empty() ? "" : ": " + why)),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A·rho_x + B·rho_y vanishes, so the bond cannot span the rate risk.
class DegenerateHedgeBasis : public Error {
 public:
  DegenerateHedgeBasis() : Error("hedge basis is degenerate (A*rho_x + B*rho_y == 0)") {}
};

class VanishingVariance : public Error {
 public:
  VanishingVariance() : Error("equity variance too small to invert sqrt(v)") {}
};

class NotPSD : public Error {
 public:
  explicit NotPSD(double pivot)
      : Error("correlation matrix is not positive semi-definite (pivot " + std::to_string(pivot) + ")") {}
};

class DimMismatch : public Error {
 public:
  DimMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " + std::to_string(got)) {}
};

class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(long epoch = -1)
      : Error(epoch < 0 ? std::string("non-finite gradient")
                        : "non-finite gradient in epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  long epoch() const noexcept { return epoch_; }

 private:
  long epoch_;
};

class NegativeRate : public Error {
 public:
  explicit NegativeRate(int k) : Error("tilted death rate is negative at k = " + std::to_string(k)) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MissingCheckpoint : public Error {
 public:
  explicit MissingCheckpoint(const std::string& path) : Error("checkpoint not found: " + path) {}
};

class UnknownCommand : public Error {
 public:
  explicit UnknownCommand(const std::string& cmd) : Error("unknown command: " + cmd) {}
};

}  // namespace elbsde
