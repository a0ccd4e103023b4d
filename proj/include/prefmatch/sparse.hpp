#pragma once

#include <cstddef>
#include <vector>

#include "prefmatch/tensor.hpp"

namespace prefmatch {

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Compressed sparse row matrix with strictly positive stored values.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Entries may arrive in any order. Throws on duplicates, out-of-range
  /// indices or non-positive values.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  const std::vector<std::size_t>& row_offsets() const noexcept { return row_ptr_; }
  const std::vector<std::size_t>& col_indices() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

  std::size_t row_nnz(std::size_t r) const { return row_ptr_[r + 1] - row_ptr_[r]; }
  std::vector<std::size_t> col_counts() const;

  /// Stored value or 0 when absent.
  double get(std::size_t r, std::size_t c) const;
  bool contains(std::size_t r, std::size_t c) const { return get(r, c) != 0.0; }

  std::vector<Triplet> triplets() const;
  SparseMatrix transpose() const;
  /// Row-major dense copy, rows x cols.
  std::vector<double> to_dense() const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

/// Sparse (constant) times dense. Gradient flows to the dense operand only.
Tensor spmm(const SparseMatrix& a, const Tensor& x);

}  // namespace prefmatch
