#pragma once

#include <cstdint>
#include <vector>

#include "spadict/matrix.hpp"

namespace spadict {

/// Boolean support pattern of a dense coefficient matrix, stored column-major
/// (entry (i, j) lives at i + j * rows) to match the compressed layout.
struct SparsityMask {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint8_t> bits;
  std::int64_t nnz = 0;

  SparsityMask() = default;
  SparsityMask(Index r, Index c) : rows(r), cols(c), bits(static_cast<std::size_t>(r * c), 0) {}

  bool test(Index i, Index j) const { return bits[static_cast<std::size_t>(i + j * rows)] != 0; }
  void set(Index i, Index j) {
    auto& b = bits[static_cast<std::size_t>(i + j * rows)];
    if (!b) {
      b = 1;
      ++nnz;
    }
  }
};

/// Column-compressed sparse matrix (CSC). Row indices are 32-bit on disk, so
/// `rows` must fit in that range; values are kept in double precision.
struct SparseColumns {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint64_t> col_ptr{0};
  std::vector<std::uint32_t> row_idx;
  std::vector<double> values;

  std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }

  /// Gathers the masked entries of `dense`. Masked zeros are stored explicitly
  /// so nnz() always equals mask.nnz.
  static SparseColumns from_mask(const Matrix& dense, const SparsityMask& mask);

  /// Keeps every entry with a nonzero value.
  static SparseColumns from_dense(const Matrix& dense);

  Matrix to_dense() const;

  /// Number of rows holding at least one stored entry.
  Index active_rows() const;

  /// Throws FormatError if col_ptr/row_idx are inconsistent.
  void validate() const;

  bool operator==(const SparseColumns&) const = default;
};

}  // namespace spadict
