#include "vardens/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "vardens/errors.hpp"

namespace vardens {

SparseMatrix::SparseMatrix(int rows, int cols, std::vector<int> row_ptr,
                           std::vector<int> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (static_cast<int>(row_ptr_.size()) != rows_ + 1 || col_idx_.size() != values_.size() ||
      row_ptr_.back() != static_cast<int>(col_idx_.size())) {
    throw InvalidArgument("SparseMatrix: inconsistent CSR arrays");
  }
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (col_idx_[k] < 0 || col_idx_[k] >= cols_ ||
          (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1])) {
        throw InvalidArgument("SparseMatrix: columns must be sorted, unique, in range");
      }
    }
  }
}

int SparseMatrix::find(int r, int c) const {
  const auto first = col_idx_.begin() + row_ptr_[r];
  const auto last = col_idx_.begin() + row_ptr_[r + 1];
  const auto it = std::lower_bound(first, last, c);
  if (it == last || *it != c) return -1;
  return static_cast<int>(it - col_idx_.begin());
}

double SparseMatrix::at(int r, int c) const {
  const int k = find(r, c);
  return k < 0 ? 0.0 : values_[k];
}

void SparseMatrix::add(int r, int c, double v) {
  const int k = find(r, c);
  if (k < 0) {
    throw InvalidArgument("SparseMatrix::add: (" + std::to_string(r) + ", " +
                          std::to_string(c) + ") outside the sparsity pattern");
  }
  values_[k] += v;
}

void SparseMatrix::add_block(std::span<const int> rows, std::span<const int> cols,
                             std::span<const double> block) {
  const std::size_t nc = cols.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      const double v = block[i * nc + j];
      if (v != 0.0) add(rows[i], cols[j], v);
    }
  }
}

void SparseMatrix::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

void SparseMatrix::scale(double s) {
  for (double& v : values_) v *= s;
}

void SparseMatrix::axpy(double s, const SparseMatrix& other) {
  if (!same_pattern(other)) throw InvalidArgument("SparseMatrix::axpy: pattern mismatch");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * other.values_[k];
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(rows_);
  multiply(x, y);
  return y;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != cols_ || static_cast<int>(y.size()) != rows_) {
    throw InvalidArgument("SparseMatrix::multiply: dimension mismatch");
  }
  for (int r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
    y[r] = s;
  }
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<int> ptr(cols_ + 1, 0);
  for (int c : col_idx_) ++ptr[c + 1];
  for (int c = 0; c < cols_; ++c) ptr[c + 1] += ptr[c];
  std::vector<int> idx(col_idx_.size());
  std::vector<double> val(values_.size());
  std::vector<int> next(ptr.begin(), ptr.end() - 1);
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const int pos = next[col_idx_[k]]++;
      idx[pos] = r;
      val[pos] = values_[k];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(ptr), std::move(idx), std::move(val));
}

void SparseMatrix::eliminate(std::span<const int> indices) {
  std::vector<bool> mark(std::max(rows_, cols_), false);
  for (int i : indices) mark[i] = true;
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const int c = col_idx_[k];
      if (mark[r] || mark[c]) values_[k] = (r == c && mark[r]) ? 1.0 : 0.0;
    }
  }
  for (int i : indices) {
    if (find(i, i) < 0) throw InvalidArgument("SparseMatrix::eliminate: missing diagonal");
  }
}

bool SparseMatrix::same_pattern(const SparseMatrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && row_ptr_ == other.row_ptr_ &&
         col_idx_ == other.col_idx_;
}

bool SparseMatrix::is_symmetric(double rel_tol) const {
  if (rows_ != cols_) return false;
  const double scale = std::max(max_abs(), 1e-300);
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (std::abs(values_[k] - at(col_idx_[k], r)) > rel_tol * scale) return false;
    }
  }
  return true;
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

void SparseMatrix::write_matrix_market(std::ostream& out) const {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
  const auto old_precision = out.precision(17);
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out << r + 1 << ' ' << col_idx_[k] + 1 << ' ' << values_[k] << '\n';
    }
  }
  out.precision(old_precision);
}

SparsityBuilder::SparsityBuilder(int rows, int cols)
    : rows_(rows), cols_(cols), entries_(rows) {}

void SparsityBuilder::add(int r, int c) {
  if (r < 0 || r >= rows_ || c < 0 || c >= cols_) {
    throw InvalidArgument("SparsityBuilder::add: index out of range");
  }
  entries_[r].push_back(c);
}

void SparsityBuilder::add_block(std::span<const int> rows, std::span<const int> cols) {
  for (int r : rows) {
    for (int c : cols) add(r, c);
  }
}

SparseMatrix SparsityBuilder::build() const {
  std::vector<int> ptr(rows_ + 1, 0);
  std::vector<int> idx;
  for (int r = 0; r < rows_; ++r) {
    std::vector<int> row = entries_[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    idx.insert(idx.end(), row.begin(), row.end());
    ptr[r + 1] = static_cast<int>(idx.size());
  }
  std::vector<double> val(idx.size(), 0.0);
  return SparseMatrix(rows_, cols_, std::move(ptr), std::move(idx), std::move(val));
}

SparseMatrix border(const SparseMatrix& a, std::span<const double> b) {
  if (a.rows() != a.cols() || static_cast<int>(b.size()) != a.rows()) {
    throw InvalidArgument("border: matrix must be square and match the constraint length");
  }
  const int n = a.rows();
  std::vector<int> ptr(n + 2, 0);
  std::vector<int> idx;
  std::vector<double> val;
  idx.reserve(a.nnz() + 2 * n + 1);
  val.reserve(a.nnz() + 2 * n + 1);
  for (int r = 0; r < n; ++r) {
    for (int k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k) {
      idx.push_back(a.col_idx()[k]);
      val.push_back(a.values()[k]);
    }
    if (b[r] != 0.0) {
      idx.push_back(n);
      val.push_back(b[r]);
    }
    ptr[r + 1] = static_cast<int>(idx.size());
  }
  for (int c = 0; c < n; ++c) {
    if (b[c] == 0.0) continue;
    idx.push_back(c);
    val.push_back(b[c]);
  }
  idx.push_back(n);
  val.push_back(0.0);
  ptr[n + 1] = static_cast<int>(idx.size());
  return SparseMatrix(n + 1, n + 1, std::move(ptr), std::move(idx), std::move(val));
}

}  // namespace vardens
