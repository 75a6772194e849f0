#pragma once

#include <cstdint>

#include "spadict/matrix.hpp"
#include "spadict/sparse_columns.hpp"

namespace spadict {

/// Y = X U V with a column-sparse V.
class CompressedLayer {
 public:
  CompressedLayer(Matrix u, SparseColumns v);

  Index d1() const { return u_.rows(); }
  Index d2() const { return v_.cols; }
  Index rank() const { return u_.cols(); }
  Index k_active() const { return k_active_; }
  std::int64_t nnz() const { return v_.nnz(); }
  std::int64_t params() const { return static_cast<std::int64_t>(u_.size()) + v_.nnz(); }

  const Matrix& u() const { return u_; }
  const SparseColumns& v() const { return v_; }

  /// H = X U, then Y_:j = sum over supp(V_:j) of H_:i v_ij.
  Matrix forward(const Matrix& x) const;

  /// U * V materialized.
  Matrix dense_weight() const;

 private:
  Matrix u_;
  SparseColumns v_;
  Index k_active_ = 0;
};

/// Multiply-adds for a batch of n rows: n * d1 * k_active + n * nnz(V).
std::int64_t flop_count(const CompressedLayer& layer, std::int64_t n);

}  // namespace spadict
