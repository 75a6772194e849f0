#include "spadict/whitening.hpp"

#include <cmath>
#include <sstream>

#include "spadict/errors.hpp"
#include "spadict/model_store.hpp"

namespace spadict {

namespace {

bool factor(const Matrix& gram, double jitter, Matrix& upper) {
  Matrix regularized = gram;
  regularized.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() != Eigen::Success) return false;
  upper = llt.matrixU();
  const auto diag = upper.diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) return false;
  // Pivot ratio (in square-root units) below 1e-7 means the Gram is singular
  // to working precision.
  const double ratio = diag.minCoeff() / diag.maxCoeff();
  return ratio > 1e-7;
}

}  // namespace

WhitenTransform build_whitener(const Matrix& gram, double jitter_rel, const std::string& layer) {
  if (gram.rows() != gram.cols() || gram.rows() == 0) {
    throw DimensionError(with_layer(layer, "Gram matrix must be square and nonempty"));
  }
  if (jitter_rel < 0.0 || !std::isfinite(jitter_rel)) {
    throw ArgumentError(with_layer(layer, "jitter_rel must be a nonnegative number"));
  }
  if (!gram.allFinite()) throw NumericalError(with_layer(layer, "Gram matrix has non-finite entries"));
  if (asymmetry(gram) > kGramSymmetryTol) {
    throw ArgumentError(with_layer(layer, "Gram matrix is not symmetric"));
  }
  const double mean_diag = gram.diagonal().mean();
  WhitenTransform t;
  for (double scale : {1.0, 10.0, 100.0}) {
    const double jitter = jitter_rel * scale * mean_diag;
    if (factor(gram, jitter, t.upper)) {
      t.jitter = jitter;
      const Index n = gram.rows();
      t.upper_inv = t.upper.triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
      return t;
    }
    if (jitter_rel == 0.0) break;
  }
  std::ostringstream msg;
  msg << "Cholesky factorization failed after escalating jitter to " << 100.0 * jitter_rel << " x mean diagonal";
  throw NumericalError(with_layer(layer, msg.str()));
}

Matrix whiten_weight(const WhitenTransform& t, const Matrix& w) {
  if (w.rows() != t.dim()) throw DimensionError("whiten_weight: weight rows do not match the transform");
  return t.upper.triangularView<Eigen::Upper>() * w;
}

Matrix unwhiten(const WhitenTransform& t, const Matrix& m) {
  if (m.rows() != t.dim()) throw DimensionError("unwhiten: matrix rows do not match the transform");
  return t.upper.triangularView<Eigen::Upper>().solve(m);
}

}  // namespace spadict
