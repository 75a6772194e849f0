#include "spadict/sparse_columns.hpp"

#include <limits>
#include <string>

#include "spadict/errors.hpp"

namespace spadict {

SparseColumns SparseColumns::from_mask(const Matrix& dense, const SparsityMask& mask) {
  if (dense.rows() != mask.rows || dense.cols() != mask.cols) {
    throw DimensionError("mask shape does not match the coefficient matrix");
  }
  if (dense.rows() > static_cast<Index>(std::numeric_limits<std::uint32_t>::max())) {
    throw ArgumentError("row count exceeds the 32-bit row index range");
  }
  SparseColumns out;
  out.rows = dense.rows();
  out.cols = dense.cols();
  out.col_ptr.assign(static_cast<std::size_t>(out.cols) + 1, 0);
  out.row_idx.reserve(static_cast<std::size_t>(mask.nnz));
  out.values.reserve(static_cast<std::size_t>(mask.nnz));
  for (Index j = 0; j < dense.cols(); ++j) {
    for (Index i = 0; i < dense.rows(); ++i) {
      if (mask.test(i, j)) {
        out.row_idx.push_back(static_cast<std::uint32_t>(i));
        out.values.push_back(dense(i, j));
      }
    }
    out.col_ptr[static_cast<std::size_t>(j) + 1] = out.values.size();
  }
  return out;
}

SparseColumns SparseColumns::from_dense(const Matrix& dense) {
  SparsityMask mask(dense.rows(), dense.cols());
  for (Index j = 0; j < dense.cols(); ++j)
    for (Index i = 0; i < dense.rows(); ++i)
      if (dense(i, j) != 0.0) mask.set(i, j);
  return from_mask(dense, mask);
}

Matrix SparseColumns::to_dense() const {
  Matrix out = Matrix::Zero(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (auto p = col_ptr[static_cast<std::size_t>(j)]; p < col_ptr[static_cast<std::size_t>(j) + 1]; ++p) {
      out(row_idx[p], j) = values[p];
    }
  }
  return out;
}

Index SparseColumns::active_rows() const {
  std::vector<bool> seen(static_cast<std::size_t>(rows), false);
  Index count = 0;
  for (auto r : row_idx) {
    if (!seen[r]) {
      seen[r] = true;
      ++count;
    }
  }
  return count;
}

void SparseColumns::validate() const {
  if (rows < 0 || cols < 0) throw FormatError("negative sparse dimensions");
  if (col_ptr.size() != static_cast<std::size_t>(cols) + 1) {
    throw FormatError("col_ptr has " + std::to_string(col_ptr.size()) + " entries, expected " +
                      std::to_string(cols + 1));
  }
  if (col_ptr.front() != 0) throw FormatError("col_ptr[0] must be 0");
  if (col_ptr.back() != values.size() || row_idx.size() != values.size()) {
    throw FormatError("col_ptr[d2] does not equal nnz");
  }
  for (std::size_t j = 0; j + 1 < col_ptr.size(); ++j) {
    const auto begin = col_ptr[j];
    const auto end = col_ptr[j + 1];
    if (end < begin) throw FormatError("col_ptr is decreasing at column " + std::to_string(j));
    if (end > values.size()) throw FormatError("col_ptr exceeds nnz at column " + std::to_string(j));
    for (auto p = begin; p < end; ++p) {
      if (row_idx[p] >= static_cast<std::uint64_t>(rows)) {
        throw FormatError("row index out of range in column " + std::to_string(j));
      }
      if (p > begin && row_idx[p] <= row_idx[p - 1]) {
        throw FormatError("row indices not strictly increasing in column " + std::to_string(j));
      }
    }
  }
}

}  // namespace spadict
