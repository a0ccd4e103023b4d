#include "prefmatch/sparse.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace prefmatch {

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_ptr_.assign(rows + 1, 0);
  m.col_idx_.reserve(entries.size());
  m.values_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.row >= rows || e.col >= cols)
      throw std::out_of_range("sparse entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                              ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    if (!(e.value > 0.0)) throw std::invalid_argument("sparse entries must be positive");
    if (i > 0 && entries[i - 1].row == e.row && entries[i - 1].col == e.col)
      throw std::invalid_argument("duplicate sparse entry (" + std::to_string(e.row) + ", " +
                                  std::to_string(e.col) + ")");
    ++m.row_ptr_[e.row + 1];
    m.col_idx_.push_back(e.col);
    m.values_.push_back(e.value);
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

std::vector<std::size_t> SparseMatrix::col_counts() const {
  std::vector<std::size_t> counts(cols_, 0);
  for (auto c : col_idx_) ++counts[c];
  return counts;
}

double SparseMatrix::get(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) throw std::out_of_range("sparse index out of range");
  auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  auto it = std::lower_bound(first, last, c);
  if (it == last || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.push_back({r, col_idx_[k], values_[k]});
  return out;
}

SparseMatrix SparseMatrix::transpose() const {
  auto t = triplets();
  for (auto& e : t) std::swap(e.row, e.col);
  return from_triplets(cols_, rows_, std::move(t));
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> d(rows_ * cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d[r * cols_ + col_idx_[k]] = values_[k];
  return d;
}

Tensor spmm(const SparseMatrix& a, const Tensor& x) {
  if (x.rank() != 2 || a.cols() != x.rows())
    throw ShapeError("spmm", {a.rows(), a.cols()}, x.shape());
  const std::size_t n = x.cols();
  const auto xv = x.values();
  std::vector<double> out(a.rows() * n, 0.0);
  const auto& rp = a.row_offsets();
  const auto& ci = a.col_indices();
  const auto& av = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* o = out.data() + r * n;
    for (auto k = rp[r]; k < rp[r + 1]; ++k) {
      const double w = av[k];
      const double* src = xv.data() + ci[k] * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += w * src[j];
    }
  }
  if (!x.requires_grad()) return Tensor::make_result("spmm", {a.rows(), n}, std::move(out), {}, nullptr);
  // A is captured by value so the tape does not depend on the caller's lifetime.
  return Tensor::make_result("spmm", {a.rows(), n}, std::move(out), {x}, [a, x, n](const Node& self) {
    Node& xn = x.node();
    xn.ensure_grad();
    const auto& rp = a.row_offsets();
    const auto& ci = a.col_indices();
    const auto& av = a.values();
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const double* g = self.grad.data() + r * n;
      for (auto k = rp[r]; k < rp[r + 1]; ++k) {
        double* dst = xn.grad.data() + ci[k] * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += av[k] * g[j];
      }
    }
  });
}

}  // namespace prefmatch
