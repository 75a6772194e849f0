#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spadict/dict_refit.hpp"
#include "spadict/factorizer.hpp"
#include "spadict/matrix.hpp"
#include "spadict/sparsifier.hpp"
#include "spadict/whitening.hpp"

namespace spadict {

struct CandidateGrid {
  std::vector<double> rank_fracs{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> ks_fracs{0.25, 0.5, 0.75, 1.0};
  double lambda = kDefaultLambda;
  double beta_margin = kDefaultBetaMargin;
  double mu = 0.0;
  ErrorMetric error_metric = ErrorMetric::frobenius_rel;
  SparsifyMode mode = SparsifyMode::column_two_stage;

  /// Throws ArgumentError unless both lists are nonempty, strictly increasing,
  /// inside (0, 1], and ks_fracs contains 1.0.
  void validate() const;
};

struct CompressionOption {
  std::int64_t rank_k = 0;        // 0 for the dense (identity) option
  std::int64_t per_col_nnz = 0;   // s
  std::int64_t cost = 0;          // d1 * k + nnz(V), or d1 * d2 when dense
  double ks_ratio = 1.0;          // s / k
  double error = 0.0;             // configured metric, original space
  double whitened_error = 0.0;    // ||W_L - D C||_F / ||W_L||_F
  bool dense = false;

  bool operator==(const CompressionOption&) const = default;
};

struct OptionSet {
  std::string layer_name;
  Index d1 = 0;
  Index d2 = 0;
  std::vector<CompressionOption> options;  // sorted by cost, identity last

  std::int64_t dense_cost() const { return static_cast<std::int64_t>(d1) * d2; }
};

CompressionOption identity_option(Index d1, Index d2);

struct CandidateResult {
  CompressionOption option;    // never replaced by identity here
  SparseFactorization factors;
  Matrix approx;               // W~
};

/// Per-layer state shared by every candidate: whitened weight, the full
/// eigendecomposition and the direction norms ||R^{-1} b_i||.
class LayerProfiler {
 public:
  LayerProfiler(const Matrix& weight, const WhitenTransform& t, const CandidateGrid& grid);

  /// Runs eigenbasis -> coefficients -> importance -> sparsify -> refit for
  /// rank k with s kept entries per column on average (target s * d2).
  CandidateResult evaluate(std::int64_t rank_k, std::int64_t per_col_nnz) const;

  /// Same with an explicit nonzero budget.
  CandidateResult evaluate_target(std::int64_t rank_k, std::int64_t target_nnz) const;

  /// Pre-refit reconstruction B * C_sparse in whitened space, for diagnostics.
  Matrix pre_refit_whitened(std::int64_t rank_k, std::int64_t target_nnz) const;

  OptionSet profile(const std::string& layer_name = {}) const;

  const Matrix& whitened() const { return whitened_; }
  const EigenBasis& basis() const { return basis_; }
  Index d1() const { return weight_.rows(); }
  Index d2() const { return weight_.cols(); }

 private:
  SparsifyResult sparsify(std::int64_t rank_k, std::int64_t target_nnz, Matrix* basis_out) const;

  const Matrix& weight_;
  const WhitenTransform& t_;
  CandidateGrid grid_;
  Matrix whitened_;
  EigenBasis basis_;
  Vector direction_norms_;
  double weight_norm_ = 0.0;
  double whitened_norm_ = 0.0;
};

/// rank_k = max(1, round(rank_frac * min(d1, d2))).
std::int64_t rank_for(double rank_frac, Index d1, Index d2);
/// s = max(1, round(ks_frac * rank_k)).
std::int64_t per_col_for(double ks_frac, std::int64_t rank_k);

OptionSet profile_layer(const Matrix& weight, const WhitenTransform& t, const CandidateGrid& grid,
                        const std::string& layer_name = {});

/// Per layer, the non-identity option whose cost is closest to
/// (1 - target_cr) * d1 * d2, ties to the cheaper one. Layers without a
/// non-identity option fall back to the identity.
std::vector<std::size_t> reference_selection(const std::vector<OptionSet>& sets, double target_cr);

/// Mean error of reference_selection.
double reference_error(const std::vector<OptionSet>& sets, double target_cr);

}  // namespace spadict
