#pragma once

#include <string>

#include "spadict/matrix.hpp"

namespace spadict {

inline constexpr double kDefaultJitterRel = 1e-6;

/// Upper-triangular Cholesky factor R of the (regularized) Gram matrix, with
/// A + jitter * I = R^T R. For calibration inputs X with A = X^T X, the
/// whitened inputs X R^{-1} have identity Gram, so ||X (W - W~)||_F equals
/// ||R W - R W~||_F.
struct WhitenTransform {
  Matrix upper;      // R
  Matrix upper_inv;  // R^{-1}, materialized once for importance weights
  double jitter = 0.0;

  Index dim() const { return upper.rows(); }
};

/// Factors `gram` after adding jitter_rel * mean(diag(gram)) to the diagonal.
/// On failure the jitter is escalated by 10x and 100x before giving up with a
/// NumericalError naming `layer`.
WhitenTransform build_whitener(const Matrix& gram, double jitter_rel = kDefaultJitterRel,
                               const std::string& layer = {});

/// R * W.
Matrix whiten_weight(const WhitenTransform& t, const Matrix& w);

/// R^{-1} * M by triangular solve.
Matrix unwhiten(const WhitenTransform& t, const Matrix& m);

}  // namespace spadict
