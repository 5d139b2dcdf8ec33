#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace vardens {

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
/// The sparsity pattern is fixed at construction; add() only touches
/// existing entries.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_idx,
               std::vector<double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nnz() const { return static_cast<int>(col_idx_.size()); }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Position of (r, c) in the value array, or -1 when outside the pattern.
  int find(int r, int c) const;
  double at(int r, int c) const;
  /// Throws InvalidArgument when (r, c) is not in the pattern.
  void add(int r, int c, double v);
  void add_block(std::span<const int> rows, std::span<const int> cols,
                 std::span<const double> block);

  void set_zero();
  void scale(double s);
  /// this += s * other; patterns must be identical.
  void axpy(double s, const SparseMatrix& other);

  std::vector<double> multiply(std::span<const double> x) const;
  void multiply(std::span<const double> x, std::span<double> y) const;
  SparseMatrix transpose() const;

  /// Zero row and column of each listed index and put 1 on the diagonal.
  void eliminate(std::span<const int> indices);

  bool same_pattern(const SparseMatrix& other) const;
  bool is_symmetric(double rel_tol) const;
  double max_abs() const;

  void write_matrix_market(std::ostream& out) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// Collects (row, col) couplings and produces a zero matrix with that pattern.
class SparsityBuilder {
 public:
  SparsityBuilder(int rows, int cols);

  void add(int r, int c);
  void add_block(std::span<const int> rows, std::span<const int> cols);
  SparseMatrix build() const;

 private:
  int rows_;
  int cols_;
  std::vector<std::vector<int>> entries_;
};

/// Symmetric bordering [A b; b^T 0] with one extra row and column.
SparseMatrix border(const SparseMatrix& a, std::span<const double> b);

}  // namespace vardens
