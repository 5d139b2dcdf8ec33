#include "vardens/linalg.hpp"

#include <klu.h>

#include <Eigen/Sparse>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <string>
#include <unsupported/Eigen/IterativeSolvers>

#include "vardens/errors.hpp"

namespace vardens {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// KLU expects compressed columns. Handing it our CSR arrays describes A^T,
// so solves use the transposed solve.
int* ptr_of(const SparseMatrix& a) { return const_cast<int*>(a.row_ptr().data()); }
int* idx_of(const SparseMatrix& a) { return const_cast<int*>(a.col_idx().data()); }
double* val_of(const SparseMatrix& a) { return const_cast<double*>(a.values().data()); }

klu_common klu_settings() {
  klu_common common;
  klu_defaults(&common);
  // COLAMD keeps fill bounded on the saddle-point systems, whose zero
  // diagonal blocks force off-diagonal pivots that wreck an AMD ordering.
  common.ordering = 1;
  common.tol = 1e-3;
  return common;
}

constexpr int kRefinementSteps = 3;

}  // namespace

DirectSolver::DirectSolver() = default;

DirectSolver::~DirectSolver() {
  release_numeric();
  release_symbolic();
}

DirectSolver::DirectSolver(DirectSolver&& other) noexcept
    : matrix_(std::move(other.matrix_)), symbolic_(other.symbolic_), numeric_(other.numeric_) {
  other.symbolic_ = nullptr;
  other.numeric_ = nullptr;
}

DirectSolver& DirectSolver::operator=(DirectSolver&& other) noexcept {
  if (this != &other) {
    release_numeric();
    release_symbolic();
    matrix_ = std::move(other.matrix_);
    symbolic_ = other.symbolic_;
    numeric_ = other.numeric_;
    other.symbolic_ = nullptr;
    other.numeric_ = nullptr;
  }
  return *this;
}

void DirectSolver::release_numeric() {
  if (numeric_) {
    klu_common common = klu_settings();
    auto* numeric = static_cast<klu_numeric*>(numeric_);
    klu_free_numeric(&numeric, &common);
  }
  numeric_ = nullptr;
}

void DirectSolver::release_symbolic() {
  if (symbolic_) {
    klu_common common = klu_settings();
    auto* symbolic = static_cast<klu_symbolic*>(symbolic_);
    klu_free_symbolic(&symbolic, &common);
  }
  symbolic_ = nullptr;
}

void DirectSolver::factorize(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("DirectSolver: matrix must be square");
  const bool reuse = symbolic_ != nullptr && matrix_.same_pattern(a);
  release_numeric();
  if (!reuse) release_symbolic();
  matrix_ = a;
  const int n = a.rows();

  klu_common common = klu_settings();
  if (!reuse) {
    symbolic_ = klu_analyze(n, ptr_of(matrix_), idx_of(matrix_), &common);
    if (!symbolic_) {
      throw SolverError("KLU symbolic analysis failed (status " + std::to_string(common.status) +
                        ")");
    }
  }
  numeric_ = klu_factor(ptr_of(matrix_), idx_of(matrix_), val_of(matrix_),
                        static_cast<klu_symbolic*>(symbolic_), &common);
  if (common.status == KLU_SINGULAR) {
    release_numeric();
    // Column singular_col of the factored A^T is row singular_col of A.
    const auto pivot = static_cast<std::size_t>(common.singular_col);
    throw SingularMatrixError(pivot, "singular matrix: zero pivot at row " +
                                         std::to_string(pivot));
  }
  if (!numeric_ || common.status != KLU_OK) {
    release_numeric();
    throw SolverError("KLU numeric factorization failed (status " +
                      std::to_string(common.status) + ")");
  }
}

std::vector<double> DirectSolver::solve(std::span<const double> b) const {
  if (!numeric_) throw SolverError("DirectSolver::solve called before factorize");
  if (static_cast<int>(b.size()) != matrix_.rows()) {
    throw InvalidArgument("DirectSolver::solve: rhs length mismatch");
  }
  auto apply_inverse = [&](std::vector<double>& v) {
    klu_common common = klu_settings();
    const int ok = klu_tsolve(static_cast<klu_symbolic*>(symbolic_),
                              static_cast<klu_numeric*>(numeric_), static_cast<int>(v.size()), 1,
                              v.data(), &common);
    if (!ok || common.status != KLU_OK) {
      throw SolverError("KLU solve failed (status " + std::to_string(common.status) + ")");
    }
  };
  std::vector<double> x(b.begin(), b.end());
  if (x.empty()) return x;
  apply_inverse(x);

  // Iterative refinement against the stored matrix.
  const double bn = norm2(b);
  std::vector<double> r(x.size());
  for (int it = 0; it < kRefinementSteps; ++it) {
    matrix_.multiply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    if (norm2(r) <= 1e-15 * bn) break;
    apply_inverse(r);
    for (std::size_t i = 0; i < r.size(); ++i) x[i] += r[i];
  }
  return x;
}

std::string format_scientific(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double relative_residual(const SparseMatrix& a, std::span<const double> x,
                         std::span<const double> b) {
  std::vector<double> r = a.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  const double bn = norm2(b);
  const double rn = norm2(r);
  return bn > 0.0 ? rn / bn : rn;
}

namespace {

void check_residual(const SolveReport& report, double tol, const char* what) {
  if (!(report.residual <= tol)) {
    throw SolverError(std::string(what) + ": relative residual " +
                      format_scientific(report.residual) + " exceeds tolerance " +
                      format_scientific(tol));
  }
}

}  // namespace

std::pair<std::vector<double>, SolveReport> solve_direct(DirectSolver& solver,
                                                         const SparseMatrix& a,
                                                         std::span<const double> b,
                                                         double tol) {
  const auto start = Clock::now();
  solver.factorize(a);
  std::vector<double> x = solver.solve(b);
  SolveReport report;
  report.residual = relative_residual(a, x, b);
  report.seconds = seconds_since(start);
  check_residual(report, tol, "solve_direct");
  return {std::move(x), report};
}

std::pair<std::vector<double>, SolveReport> solve_direct(const SparseMatrix& a,
                                                         std::span<const double> b,
                                                         double tol) {
  DirectSolver solver;
  return solve_direct(solver, a, b, tol);
}

namespace {

std::pair<std::vector<double>, SolveReport> solve_bordered(DirectSolver& solver,
                                                           const LinearSystem& system,
                                                           double tol) {
  const auto start = Clock::now();
  const int n = system.matrix.rows();
  const SparseMatrix bordered = border(system.matrix, system.constraint->functional);
  try {
    solver.factorize(bordered);
  } catch (const SingularMatrixError& e) {
    const auto& c = *system.constraint;
    bool annihilates = false;
    if (static_cast<int>(c.null_mode.size()) == n) {
      double mz = 0.0, mm = 0.0, zz = 0.0;
      for (int i = 0; i < n; ++i) {
        mz += c.functional[i] * c.null_mode[i];
        mm += c.functional[i] * c.functional[i];
        zz += c.null_mode[i] * c.null_mode[i];
      }
      annihilates = std::abs(mz) <= 1e-14 * std::sqrt(mm * zz);
    }
    if (static_cast<int>(e.pivot_row()) == n || annihilates) {
      throw ConstraintConflictError(
          "saddle solve: constraint is incompatible with the operator (" +
          std::string(e.what()) + ")");
    }
    throw;
  }
  std::vector<double> rhs(system.rhs);
  rhs.push_back(0.0);
  std::vector<double> x = solver.solve(rhs);
  SolveReport report;
  report.residual = relative_residual(bordered, x, rhs);
  report.seconds = seconds_since(start);
  check_residual(report, tol, "solve_saddle");
  x.resize(n);
  return {std::move(x), report};
}

void validate(const LinearSystem& system) {
  const int n = system.matrix.rows();
  if (system.matrix.cols() != n || static_cast<int>(system.rhs.size()) != n) {
    throw InvalidArgument("solve_saddle: system is not square or rhs length mismatches");
  }
  if (!system.constraint) throw InvalidArgument("solve_saddle: missing constraint");
  if (static_cast<int>(system.constraint->functional.size()) != n) {
    throw InvalidArgument("solve_saddle: constraint length mismatch");
  }
}

}  // namespace

namespace {

std::pair<std::vector<double>, SolveReport> solve_pinned(DirectSolver& solver,
                                                         const LinearSystem& system,
                                                         int pin_index, double tol) {
  const int n = system.matrix.rows();
  const Constraint& c = *system.constraint;
  if (pin_index < 0 || pin_index >= n) throw InvalidArgument("solve_saddle: bad pin index");
  if (static_cast<int>(c.null_mode.size()) != n) {
    throw InvalidArgument("solve_saddle: pinning needs the null mode");
  }
  const auto start = Clock::now();
  SparseMatrix pinned = system.matrix;
  const int pin[1] = {pin_index};
  pinned.eliminate(pin);
  std::vector<double> rhs(system.rhs);
  rhs[pin_index] = 0.0;
  solver.factorize(pinned);
  std::vector<double> x = solver.solve(rhs);

  double mx = 0.0;
  double mz = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += c.functional[i] * x[i];
    mz += c.functional[i] * c.null_mode[i];
  }
  if (mz == 0.0) throw ConstraintConflictError("solve_saddle: constraint annihilates the null mode");
  for (int i = 0; i < n; ++i) x[i] -= (mx / mz) * c.null_mode[i];

  SolveReport report;
  report.residual = relative_residual(system.matrix, x, system.rhs);
  report.seconds = seconds_since(start);
  check_residual(report, tol, "solve_saddle (pinned)");
  return {std::move(x), report};
}

}  // namespace

std::pair<std::vector<double>, SolveReport> solve_saddle(DirectSolver& solver,
                                                         const LinearSystem& system,
                                                         ConstraintStrategy strategy,
                                                         int pin_index, double tol) {
  validate(system);
  if (strategy == ConstraintStrategy::Multiplier) return solve_bordered(solver, system, tol);
  return solve_pinned(solver, system, pin_index, tol);
}

std::pair<std::vector<double>, SolveReport> solve_saddle(const LinearSystem& system,
                                                         ConstraintStrategy strategy,
                                                         int pin_index, double tol) {
  DirectSolver solver;
  return solve_saddle(solver, system, strategy, pin_index, tol);
}

std::pair<std::vector<double>, SolveReport> solve_krylov(const SparseMatrix& a,
                                                         std::span<const double> b,
                                                         const KrylovOptions& options) {
  using EigenCsr = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
  const auto start = Clock::now();
  const int n = a.rows();
  Eigen::Map<const EigenCsr> view(a.rows(), a.cols(), a.nnz(), a.row_ptr().data(),
                                  a.col_idx().data(), a.values().data());
  const EigenCsr mat = view;
  Eigen::GMRES<EigenCsr, Eigen::IncompleteLUT<double>> gmres;
  gmres.preconditioner().setDroptol(options.drop_tolerance);
  gmres.preconditioner().setFillfactor(options.fill_factor);
  gmres.set_restart(options.restart);
  gmres.setMaxIterations(options.max_iterations);
  gmres.setTolerance(0.5 * options.tolerance);
  gmres.compute(mat);
  if (gmres.info() != Eigen::Success) throw SolverError("solve_krylov: ILUT setup failed");
  const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n);
  const Eigen::VectorXd sol = gmres.solve(rhs);
  std::vector<double> x(sol.data(), sol.data() + n);
  SolveReport report;
  report.iterations = static_cast<int>(gmres.iterations());
  report.residual = relative_residual(a, x, b);
  report.seconds = seconds_since(start);
  check_residual(report, options.tolerance, "solve_krylov");
  return {std::move(x), report};
}

}  // namespace vardens
