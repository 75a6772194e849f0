#pragma once

#include <string_view>

#include "spadict/matrix.hpp"
#include "spadict/sparse_columns.hpp"
#include "spadict/whitening.hpp"

namespace spadict {

struct RefitResult {
  Matrix dictionary;   // d1 x k
  double mu_used = 0.0;
};

/// D = W_L C^T (C C^T + mu I)^{-1}, solved through a Cholesky factorization of
/// the k x k normal matrix. With mu = 0 and a singular normal matrix, mu is
/// raised to 1e-10 * trace(C C^T) / k (1e-10 when the trace is zero).
RefitResult ridge_refit(const Matrix& whitened_weight, const Matrix& sparse_coeffs, double mu = 0.0);

/// Factor pair of one compressed layer.
struct SparseFactorization {
  Matrix dictionary;     // D, whitened space
  SparseColumns coeffs;  // V = C_sparse
  Matrix u;              // U = R^{-1} D
  double mu = 0.0;
};

SparseFactorization make_factorization(const WhitenTransform& t, RefitResult refit,
                                       const Matrix& sparse_coeffs, const SparsityMask& mask);

/// W~ = U * V.
Matrix reconstruct(const WhitenTransform& t, const SparseFactorization& f);

struct ErrorReport {
  double frobenius_rel = 0.0;
  double l1_abs = 0.0;
  double mean_cos_cols = 0.0;  // mean over columns of (1 - cosine similarity)
  double spectral_abs = 0.0;
};

enum class ErrorMetric { frobenius_rel, l1_abs, mean_cos_cols, spectral_abs };

ErrorMetric parse_error_metric(std::string_view name);
std::string_view to_string(ErrorMetric metric);
double select(const ErrorReport& report, ErrorMetric metric);

/// Throws ArgumentError when ||W||_F is zero.
ErrorReport error_report(const Matrix& w, const Matrix& approx);

/// ||A - B||_F / ||A||_F without the other metrics.
double relative_frobenius(const Matrix& reference, const Matrix& approx);

}  // namespace spadict
