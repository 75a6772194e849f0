#include "spadict/dict_refit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spadict/errors.hpp"

namespace spadict {

namespace {

// Cholesky solve of G X = B. Fails when G is not numerically positive definite.
bool spd_solve(const Matrix& g, const Matrix& rhs, Matrix& out) {
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) return false;
  const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) return false;
  if (diag.minCoeff() / diag.maxCoeff() <= 1e-7) return false;
  out = llt.solve(rhs);
  return out.allFinite();
}

}  // namespace

RefitResult ridge_refit(const Matrix& whitened_weight, const Matrix& sparse_coeffs, double mu) {
  if (sparse_coeffs.cols() != whitened_weight.cols()) {
    throw DimensionError("ridge_refit: coefficient columns do not match the weight");
  }
  if (!(mu >= 0.0)) throw ArgumentError("ridge_refit: mu must be >= 0");
  const Index k = sparse_coeffs.rows();
  if (k == 0) return {Matrix::Zero(whitened_weight.rows(), 0), mu};

  Matrix normal = sparse_coeffs * sparse_coeffs.transpose();
  const Matrix rhs = sparse_coeffs * whitened_weight.transpose();  // k x d1, = (W_L C^T)^T

  RefitResult out;
  out.mu_used = mu;
  Matrix solution;
  Matrix regularized = normal;
  regularized.diagonal().array() += mu;
  bool ok = spd_solve(regularized, rhs, solution);
  if (!ok && mu == 0.0) {
    const double trace = normal.trace();
    out.mu_used = trace > 0.0 ? 1e-10 * trace / static_cast<double>(k) : 1e-10;
    regularized = normal;
    regularized.diagonal().array() += out.mu_used;
    ok = spd_solve(regularized, rhs, solution);
  }
  if (!ok) throw NumericalError("ridge_refit: normal matrix is not positive definite after regularization");
  out.dictionary = solution.transpose();
  return out;
}

SparseFactorization make_factorization(const WhitenTransform& t, RefitResult refit, const Matrix& sparse_coeffs,
                                       const SparsityMask& mask) {
  SparseFactorization f;
  f.u = unwhiten(t, refit.dictionary);
  f.dictionary = std::move(refit.dictionary);
  f.coeffs = SparseColumns::from_mask(sparse_coeffs, mask);
  f.mu = refit.mu_used;
  return f;
}

Matrix reconstruct(const WhitenTransform& t, const SparseFactorization& f) {
  if (f.u.rows() != t.dim() || f.u.cols() != f.coeffs.rows) {
    throw DimensionError("reconstruct: factor shapes do not match the transform");
  }
  Matrix out = Matrix::Zero(f.u.rows(), f.coeffs.cols);
  const auto& v = f.coeffs;
  for (Index j = 0; j < v.cols; ++j) {
    for (auto p = v.col_ptr[static_cast<std::size_t>(j)]; p < v.col_ptr[static_cast<std::size_t>(j) + 1]; ++p) {
      out.col(j).noalias() += f.u.col(v.row_idx[p]) * v.values[p];
    }
  }
  return out;
}

ErrorMetric parse_error_metric(std::string_view name) {
  if (name == "frobenius_rel") return ErrorMetric::frobenius_rel;
  if (name == "l1_abs") return ErrorMetric::l1_abs;
  if (name == "mean_cos_cols") return ErrorMetric::mean_cos_cols;
  if (name == "spectral_abs") return ErrorMetric::spectral_abs;
  throw ArgumentError("unknown error metric '" + std::string(name) + "'");
}

std::string_view to_string(ErrorMetric metric) {
  switch (metric) {
    case ErrorMetric::frobenius_rel: return "frobenius_rel";
    case ErrorMetric::l1_abs: return "l1_abs";
    case ErrorMetric::mean_cos_cols: return "mean_cos_cols";
    case ErrorMetric::spectral_abs: return "spectral_abs";
  }
  return "unknown";
}

double select(const ErrorReport& report, ErrorMetric metric) {
  switch (metric) {
    case ErrorMetric::frobenius_rel: return report.frobenius_rel;
    case ErrorMetric::l1_abs: return report.l1_abs;
    case ErrorMetric::mean_cos_cols: return report.mean_cos_cols;
    case ErrorMetric::spectral_abs: return report.spectral_abs;
  }
  return report.frobenius_rel;
}

double relative_frobenius(const Matrix& reference, const Matrix& approx) {
  if (reference.rows() != approx.rows() || reference.cols() != approx.cols()) {
    throw DimensionError("relative error: shapes differ");
  }
  const double norm = reference.norm();
  if (norm == 0.0) throw ArgumentError("relative error: reference has zero norm");
  return (reference - approx).norm() / norm;
}

ErrorReport error_report(const Matrix& w, const Matrix& approx) {
  ErrorReport r;
  r.frobenius_rel = relative_frobenius(w, approx);
  const Matrix diff = w - approx;
  r.l1_abs = diff.cwiseAbs().sum();

  double cos_sum = 0.0;
  for (Index j = 0; j < w.cols(); ++j) {
    const auto a = w.col(j);
    const auto b = approx.col(j);
    if (a == b) continue;
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
      cos_sum += 1.0;
      continue;
    }
    cos_sum += 1.0 - std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  }
  r.mean_cos_cols = w.cols() > 0 ? cos_sum / static_cast<double>(w.cols()) : 0.0;

  if ((diff.array() != 0.0).any()) {
    Eigen::BDCSVD<Matrix> svd(diff);
    r.spectral_abs = svd.singularValues()(0);
  }
  return r;
}

}  // namespace spadict
