#pragma once

#include <optional>
#include <string>
#include <span>
#include <utility>
#include <vector>

#include "vardens/sparse_matrix.hpp"

namespace vardens {

inline constexpr double kSolverTolerance = 1e-10;

struct SolveReport {
  double residual = 0.0;  // ||Ax - b|| / ||b||
  int iterations = 0;     // 0 for direct solves
  double seconds = 0.0;
};

/// One linear functional m with m.x = 0 imposed on the solution, plus the
/// null-space direction z of the unconstrained operator (needed by pinning).
struct Constraint {
  std::vector<double> functional;
  std::vector<double> null_mode;
};

struct LinearSystem {
  SparseMatrix matrix;
  std::vector<double> rhs;
  std::optional<Constraint> constraint;
};

enum class ConstraintStrategy {
  Multiplier,  // symmetric bordering with one Lagrange multiplier
  Pin,         // fix one unknown to zero, then shift along the null mode
};

/// Sparse LU (KLU with COLAMD ordering). Factorizing a matrix with the
/// same pattern as the previous one reuses the symbolic analysis.
class DirectSolver {
 public:
  DirectSolver();
  ~DirectSolver();
  DirectSolver(const DirectSolver&) = delete;
  DirectSolver& operator=(const DirectSolver&) = delete;
  DirectSolver(DirectSolver&& other) noexcept;
  DirectSolver& operator=(DirectSolver&& other) noexcept;

  /// Throws SingularMatrixError naming the pivot row on a zero pivot.
  void factorize(const SparseMatrix& a);
  std::vector<double> solve(std::span<const double> b) const;

  bool factorized() const { return numeric_ != nullptr; }
  int size() const { return matrix_.rows(); }
  const SparseMatrix& matrix() const { return matrix_; }

 private:
  void release_numeric();
  void release_symbolic();

  SparseMatrix matrix_;
  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
};

double relative_residual(const SparseMatrix& a, std::span<const double> x,
                         std::span<const double> b);

/// "%.3e" formatting for residuals in error messages.
std::string format_scientific(double v);

/// Direct solve; asserts ||Ax-b|| <= tol ||b|| before returning.
std::pair<std::vector<double>, SolveReport> solve_direct(
    const SparseMatrix& a, std::span<const double> b, double tol = kSolverTolerance);

/// Same, reusing `solver` (and its symbolic analysis) across calls.
std::pair<std::vector<double>, SolveReport> solve_direct(
    DirectSolver& solver, const SparseMatrix& a, std::span<const double> b,
    double tol = kSolverTolerance);

/// Solves a system whose operator has a one-dimensional null space removed by
/// system.constraint. With Multiplier the bordered matrix is factorized; with
/// Pin the unknown `pin_index` is fixed and the result is shifted along the
/// null mode. Throws ConstraintConflictError when the functional vanishes on
/// the null mode or the bordered system is singular at the multiplier.
std::pair<std::vector<double>, SolveReport> solve_saddle(
    const LinearSystem& system, ConstraintStrategy strategy = ConstraintStrategy::Multiplier,
    int pin_index = -1, double tol = kSolverTolerance);

/// Same, reusing `solver` (and its symbolic analysis) across calls. Pin
/// avoids the dense bordering row and factorizes far faster.
std::pair<std::vector<double>, SolveReport> solve_saddle(DirectSolver& solver,
                                                         const LinearSystem& system,
                                                         ConstraintStrategy strategy,
                                                         int pin_index = -1,
                                                         double tol = kSolverTolerance);

struct KrylovOptions {
  double tolerance = kSolverTolerance;
  int restart = 50;
  int max_iterations = 2000;
  double drop_tolerance = 1e-4;
  int fill_factor = 10;
};

/// Restarted GMRES with an ILUT preconditioner.
std::pair<std::vector<double>, SolveReport> solve_krylov(
    const SparseMatrix& a, std::span<const double> b, const KrylovOptions& options = {});

}  // namespace vardens
