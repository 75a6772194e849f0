#include "spadict/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spadict/errors.hpp"

namespace spadict {

namespace {

struct Cell {
  double score;
  Index row;
  Index col;
};

// Higher score first; ties go to the lexicographically smaller (row, col).
bool ranks_before(const Cell& a, const Cell& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.row != b.row) return a.row < b.row;
  return a.col < b.col;
}

void keep_top(std::vector<Cell>& cells, std::int64_t count, SparsityMask& mask) {
  const auto n = std::min<std::int64_t>(count, static_cast<std::int64_t>(cells.size()));
  if (n <= 0) return;
  std::partial_sort(cells.begin(), cells.begin() + n, cells.end(), ranks_before);
  for (std::int64_t i = 0; i < n; ++i) mask.set(cells[static_cast<std::size_t>(i)].row, cells[static_cast<std::size_t>(i)].col);
}

void check_inputs(const Matrix& coeffs, const Matrix& imp, std::int64_t target_nnz, double beta_margin) {
  if (coeffs.rows() != imp.rows() || coeffs.cols() != imp.cols()) {
    throw DimensionError("sparsify: importance shape does not match coefficients");
  }
  const auto total = static_cast<std::int64_t>(coeffs.size());
  if (target_nnz < 0 || target_nnz > total) {
    throw ArgumentError("sparsify: target_nnz " + std::to_string(target_nnz) + " outside [0, " +
                        std::to_string(total) + "]");
  }
  if (!(beta_margin >= 0.0)) throw ArgumentError("sparsify: beta_margin must be >= 0");
  if (!imp.allFinite()) throw ArgumentError("sparsify: importance has non-finite entries");
}

SparsifyResult apply_mask(const Matrix& coeffs, SparsityMask mask) {
  SparsifyResult out;
  out.sparse = Matrix::Zero(coeffs.rows(), coeffs.cols());
  for (Index j = 0; j < coeffs.cols(); ++j)
    for (Index i = 0; i < coeffs.rows(); ++i)
      if (mask.test(i, j)) out.sparse(i, j) = coeffs(i, j);
  out.mask = std::move(mask);
  return out;
}

// Group-wise top-s followed by global reactivation. Groups are columns when
// `by_column`, rows otherwise.
SparsityMask two_stage_mask(const Matrix& imp, std::int64_t target_nnz, double beta_margin, bool by_column) {
  const Index rows = imp.rows();
  const Index cols = imp.cols();
  SparsityMask mask(rows, cols);
  const Index groups = by_column ? cols : rows;
  const Index group_len = by_column ? rows : cols;
  if (groups == 0 || target_nnz == 0) return mask;

  const auto margin = static_cast<std::int64_t>(std::ceil(beta_margin * static_cast<double>(rows) * static_cast<double>(cols)));
  const std::int64_t stage1_total = target_nnz - margin;
  std::int64_t s = stage1_total > 0 ? stage1_total / groups : 0;
  s = std::min<std::int64_t>(s, group_len);

  if (s > 0) {
    std::vector<Cell> cells(static_cast<std::size_t>(group_len));
    for (Index g = 0; g < groups; ++g) {
      for (Index t = 0; t < group_len; ++t) {
        const Index i = by_column ? t : g;
        const Index j = by_column ? g : t;
        cells[static_cast<std::size_t>(t)] = {imp(i, j), i, j};
      }
      keep_top(cells, s, mask);
    }
  }

  const std::int64_t remaining = target_nnz - mask.nnz;
  if (remaining > 0) {
    std::vector<Cell> masked;
    masked.reserve(static_cast<std::size_t>(imp.size() - mask.nnz));
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        if (!mask.test(i, j)) masked.push_back({imp(i, j), i, j});
    keep_top(masked, remaining, mask);
  }
  return mask;
}

SparsityMask global_mask(const Matrix& imp, std::int64_t target_nnz) {
  SparsityMask mask(imp.rows(), imp.cols());
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(imp.size()));
  for (Index i = 0; i < imp.rows(); ++i)
    for (Index j = 0; j < imp.cols(); ++j) cells.push_back({imp(i, j), i, j});
  keep_top(cells, target_nnz, mask);
  return mask;
}

}  // namespace

ImportanceMatrix importance_from_norms(const Matrix& coeffs, const Vector& direction_norms, double lambda) {
  if (direction_norms.size() != coeffs.rows()) {
    throw DimensionError("importance: one direction norm per coefficient row is required");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("importance: lambda must lie in [0, 1]");
  ImportanceMatrix out;
  out.lambda = lambda;
  out.nu = direction_norms.array().pow(lambda).matrix();
  out.imp = (coeffs.cwiseAbs().array().colwise() * out.nu.array()).matrix();
  return out;
}

ImportanceMatrix importance(const Matrix& coeffs, const EigenBasis& basis, const WhitenTransform& t, double lambda) {
  if (basis.basis.rows() != t.dim() || basis.rank() != coeffs.rows()) {
    throw DimensionError("importance: basis, transform and coefficients disagree");
  }
  const Vector norms = (t.upper_inv.triangularView<Eigen::Upper>() * basis.basis).colwise().norm().transpose();
  return importance_from_norms(coeffs, norms, lambda);
}

SparsifyResult two_stage_sparsify(const Matrix& coeffs, const Matrix& imp, std::int64_t target_nnz,
                                  double beta_margin) {
  check_inputs(coeffs, imp, target_nnz, beta_margin);
  return apply_mask(coeffs, two_stage_mask(imp, target_nnz, beta_margin, true));
}

SparsifyMode parse_sparsify_mode(std::string_view name) {
  if (name == "column_two_stage") return SparsifyMode::column_two_stage;
  if (name == "per_row") return SparsifyMode::per_row;
  if (name == "global") return SparsifyMode::global;
  if (name == "whitened_only") return SparsifyMode::whitened_only;
  throw ArgumentError("unknown sparsify mode '" + std::string(name) + "'");
}

std::string_view to_string(SparsifyMode mode) {
  switch (mode) {
    case SparsifyMode::column_two_stage: return "column_two_stage";
    case SparsifyMode::per_row: return "per_row";
    case SparsifyMode::global: return "global";
    case SparsifyMode::whitened_only: return "whitened_only";
  }
  return "unknown";
}

SparsifyResult sparsify_mode(const Matrix& coeffs, const Matrix& imp, std::int64_t target_nnz, SparsifyMode mode,
                             double beta_margin) {
  check_inputs(coeffs, imp, target_nnz, beta_margin);
  switch (mode) {
    case SparsifyMode::column_two_stage:
      return apply_mask(coeffs, two_stage_mask(imp, target_nnz, beta_margin, true));
    case SparsifyMode::per_row:
      return apply_mask(coeffs, two_stage_mask(imp, target_nnz, beta_margin, false));
    case SparsifyMode::global:
      return apply_mask(coeffs, global_mask(imp, target_nnz));
    case SparsifyMode::whitened_only:
      return apply_mask(coeffs, two_stage_mask(coeffs.cwiseAbs(), target_nnz, beta_margin, true));
  }
  throw ArgumentError("unknown sparsify mode");
}

}  // namespace spadict
