#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vardens {

/// Thrown for malformed inputs: bad sizes, unknown names, mismatched spaces.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Degenerate or inconsistent geometry (zero-volume cells, bad connectivity).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A direct factorization hit a zero pivot.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(std::size_t pivot_row, const std::string& what)
      : std::runtime_error(what), pivot_row_(pivot_row) {}

  std::size_t pivot_row() const noexcept { return pivot_row_; }

 private:
  std::size_t pivot_row_;
};

/// The bordering constraint of a saddle-point solve is incompatible with the
/// operator (the augmented system became singular at the multiplier).
class ConstraintConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solve returned without meeting its residual contract.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PositivityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values appeared in the discrete solution.
class NumericalBreakdown : public std::runtime_error {
 public:
  NumericalBreakdown(int step, const std::string& what)
      : std::runtime_error(what), step_(step) {}

  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace vardens
