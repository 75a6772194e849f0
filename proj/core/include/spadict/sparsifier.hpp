#pragma once

#include <cstdint>
#include <string_view>

#include "spadict/factorizer.hpp"
#include "spadict/matrix.hpp"
#include "spadict/sparse_columns.hpp"
#include "spadict/whitening.hpp"

namespace spadict {

inline constexpr double kDefaultLambda = 0.5;
inline constexpr double kDefaultBetaMargin = 5e-3;

/// imp_ij = |c_ij| * nu_i with nu_i = ||R^{-1} b_i||_2^lambda.
struct ImportanceMatrix {
  Matrix imp;
  Vector nu;
  double lambda = kDefaultLambda;
};

ImportanceMatrix importance(const Matrix& coeffs, const EigenBasis& basis,
                            const WhitenTransform& t, double lambda = kDefaultLambda);

/// Same fusion with precomputed direction norms ||R^{-1} b_i||_2.
ImportanceMatrix importance_from_norms(const Matrix& coeffs, const Vector& direction_norms,
                                       double lambda = kDefaultLambda);

struct SparsifyResult {
  Matrix sparse;  // masked copy of C
  SparsityMask mask;
};

/// Stage 1 keeps the top-s entries of every column, with
/// s = max(0, floor((target_nnz - ceil(beta_margin * r * d2)) / d2)).
/// Stage 2 reactivates masked entries in decreasing importance over the whole
/// matrix until exactly target_nnz are kept. Ties go to the lexicographically
/// smaller (row, col).
SparsifyResult two_stage_sparsify(const Matrix& coeffs, const Matrix& imp, std::int64_t target_nnz,
                                  double beta_margin = kDefaultBetaMargin);

enum class SparsifyMode { column_two_stage, per_row, global, whitened_only };

SparsifyMode parse_sparsify_mode(std::string_view name);
std::string_view to_string(SparsifyMode mode);

/// Ablation entry point. whitened_only ignores `imp` and scores by |C|;
/// per_row is the two-stage scheme with rows in place of columns; global
/// keeps the top target_nnz entries of imp.
SparsifyResult sparsify_mode(const Matrix& coeffs, const Matrix& imp, std::int64_t target_nnz,
                             SparsifyMode mode, double beta_margin = kDefaultBetaMargin);

}  // namespace spadict
