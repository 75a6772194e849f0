#pragma once

#include "spadict/matrix.hpp"

namespace spadict {

/// Leading eigenvectors of W_L W_L^T, ordered by nonincreasing eigenvalue.
struct EigenBasis {
  Matrix basis;    // d1 x r, orthonormal columns
  Vector eigvals;  // r, nonincreasing, clamped at 0

  Index rank() const { return basis.cols(); }

  /// First r columns (r <= rank()).
  EigenBasis leading(Index r) const;
};

/// Top-r eigenvectors of the symmetric PSD matrix W_L W_L^T. Each column is
/// sign-canonicalized so that its largest-magnitude entry is positive (first
/// such entry on ties).
EigenBasis top_r_basis(const Matrix& whitened_weight, Index r);

/// Full eigendecomposition, rank = d1. Slicing with leading() gives the same
/// result as top_r_basis for every r.
EigenBasis full_basis(const Matrix& whitened_weight);

/// C = B^T W_L.
Matrix coefficients(const EigenBasis& basis, const Matrix& whitened_weight);

struct TruncatedSvd {
  Matrix u;      // m x k
  Vector sigma;  // k
  Matrix v;      // n x k
  double residual = 0.0;  // sqrt(sum_{i>k} sigma_i^2)
  Vector all_sigma;
};

/// Best rank-k approximation by SVD. Used as a reference for the
/// eigenbasis path.
TruncatedSvd truncated_svd_oracle(const Matrix& w, Index k);

}  // namespace spadict
