#include "spadict/runtime.hpp"

#include "spadict/errors.hpp"

namespace spadict {

CompressedLayer::CompressedLayer(Matrix u, SparseColumns v) : u_(std::move(u)), v_(std::move(v)) {
  v_.validate();
  if (u_.cols() != v_.rows) throw DimensionError("CompressedLayer: U columns must equal V rows");
  k_active_ = v_.active_rows();
}

Matrix CompressedLayer::forward(const Matrix& x) const {
  if (x.cols() != d1()) throw DimensionError("forward: input width does not match d1");
  const Matrix h = x * u_;
  Matrix y = Matrix::Zero(x.rows(), d2());
  for (Index j = 0; j < d2(); ++j) {
    auto out = y.col(j);
    for (auto p = v_.col_ptr[static_cast<std::size_t>(j)]; p < v_.col_ptr[static_cast<std::size_t>(j) + 1]; ++p) {
      out.noalias() += h.col(v_.row_idx[p]) * v_.values[p];
    }
  }
  return y;
}

Matrix CompressedLayer::dense_weight() const { return u_ * v_.to_dense(); }

std::int64_t flop_count(const CompressedLayer& layer, std::int64_t n) {
  return n * static_cast<std::int64_t>(layer.d1()) * static_cast<std::int64_t>(layer.k_active()) + n * layer.nnz();
}

}  // namespace spadict
