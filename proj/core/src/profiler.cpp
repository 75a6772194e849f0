#include "spadict/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "spadict/errors.hpp"

namespace spadict {

namespace {

void validate_fracs(const std::vector<double>& fracs, const char* what) {
  if (fracs.empty()) throw ArgumentError(std::string(what) + " must not be empty");
  for (std::size_t i = 0; i < fracs.size(); ++i) {
    if (!(fracs[i] > 0.0 && fracs[i] <= 1.0)) throw ArgumentError(std::string(what) + " entries must lie in (0, 1]");
    if (i > 0 && !(fracs[i] > fracs[i - 1])) throw ArgumentError(std::string(what) + " must be strictly increasing");
  }
}

}  // namespace

void CandidateGrid::validate() const {
  validate_fracs(rank_fracs, "rank grid");
  validate_fracs(ks_fracs, "ks grid");
  if (ks_fracs.back() != 1.0) throw ArgumentError("ks grid must contain 1.0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("lambda must lie in [0, 1]");
  if (!(beta_margin >= 0.0)) throw ArgumentError("beta margin must be >= 0");
  if (!(mu >= 0.0)) throw ArgumentError("mu must be >= 0");
}

std::int64_t rank_for(double rank_frac, Index d1, Index d2) {
  const auto base = static_cast<double>(std::min(d1, d2));
  return std::max<std::int64_t>(1, std::llround(rank_frac * base));
}

std::int64_t per_col_for(double ks_frac, std::int64_t rank_k) {
  return std::max<std::int64_t>(1, std::llround(ks_frac * static_cast<double>(rank_k)));
}

CompressionOption identity_option(Index d1, Index d2) {
  CompressionOption o;
  o.dense = true;
  o.cost = static_cast<std::int64_t>(d1) * d2;
  o.ks_ratio = 1.0;
  o.error = 0.0;
  o.whitened_error = 0.0;
  return o;
}

LayerProfiler::LayerProfiler(const Matrix& weight, const WhitenTransform& t, const CandidateGrid& grid)
    : weight_(weight), t_(t), grid_(grid) {
  grid_.validate();
  whitened_ = whiten_weight(t, weight);
  basis_ = full_basis(whitened_);
  direction_norms_ = (t.upper_inv.triangularView<Eigen::Upper>() * basis_.basis).colwise().norm().transpose();
  weight_norm_ = weight.norm();
  whitened_norm_ = whitened_.norm();
  if (weight_norm_ == 0.0 || whitened_norm_ == 0.0) throw ArgumentError("layer weight has zero norm");
}

SparsifyResult LayerProfiler::sparsify(std::int64_t rank_k, std::int64_t target_nnz, Matrix* basis_out) const {
  if (rank_k < 1 || rank_k > d1()) throw ArgumentError("rank " + std::to_string(rank_k) + " out of range");
  const Matrix basis = basis_.basis.leftCols(rank_k);
  const Matrix coeffs = basis.transpose() * whitened_;
  const auto imp = importance_from_norms(coeffs, direction_norms_.head(rank_k), grid_.lambda);
  if (basis_out) *basis_out = basis;
  return sparsify_mode(coeffs, imp.imp, target_nnz, grid_.mode, grid_.beta_margin);
}

CandidateResult LayerProfiler::evaluate_target(std::int64_t rank_k, std::int64_t target_nnz) const {
  auto sparse = sparsify(rank_k, target_nnz, nullptr);
  auto refit = ridge_refit(whitened_, sparse.sparse, grid_.mu);
  const double whitened_err = (whitened_ - refit.dictionary * sparse.sparse).norm() / whitened_norm_;

  CandidateResult out;
  out.factors = make_factorization(t_, std::move(refit), sparse.sparse, sparse.mask);
  out.approx = reconstruct(t_, out.factors);
  const auto report = error_report(weight_, out.approx);

  auto& o = out.option;
  o.rank_k = rank_k;
  o.per_col_nnz = d2() > 0 ? target_nnz / d2() : 0;
  o.cost = static_cast<std::int64_t>(d1()) * rank_k + sparse.mask.nnz;
  o.ks_ratio = static_cast<double>(o.per_col_nnz) / static_cast<double>(rank_k);
  o.error = select(report, grid_.error_metric);
  o.whitened_error = whitened_err;
  return out;
}

CandidateResult LayerProfiler::evaluate(std::int64_t rank_k, std::int64_t per_col_nnz) const {
  return evaluate_target(rank_k, per_col_nnz * d2());
}

Matrix LayerProfiler::pre_refit_whitened(std::int64_t rank_k, std::int64_t target_nnz) const {
  Matrix basis;
  const auto sparse = sparsify(rank_k, target_nnz, &basis);
  return basis * sparse.sparse;
}

OptionSet LayerProfiler::profile(const std::string& layer_name) const {
  OptionSet set;
  set.layer_name = layer_name;
  set.d1 = d1();
  set.d2 = d2();
  const auto dense_cost = set.dense_cost();

  // cost -> best option; std::map keeps the result sorted by cost.
  std::map<std::int64_t, CompressionOption> by_cost;
  auto offer = [&](const CompressionOption& o) {
    auto [it, inserted] = by_cost.emplace(o.cost, o);
    if (!inserted && o.error < it->second.error) it->second = o;
  };

  for (double rank_frac : grid_.rank_fracs) {
    const auto k = rank_for(rank_frac, d1(), d2());
    for (double ks_frac : grid_.ks_fracs) {
      const auto s = per_col_for(ks_frac, k);
      const auto cost = static_cast<std::int64_t>(d1()) * k + s * d2();
      if (cost >= dense_cost) continue;
      try {
        offer(evaluate(k, s).option);
      } catch (const Error& e) {
        throw NumericalError(with_layer(layer_name, "candidate (k=" + std::to_string(k) + ", s=" +
                                                        std::to_string(s) + "): " + e.what()));
      }
    }
  }
  offer(identity_option(d1(), d2()));

  set.options.reserve(by_cost.size());
  for (auto& [cost, o] : by_cost) set.options.push_back(o);
  return set;
}

OptionSet profile_layer(const Matrix& weight, const WhitenTransform& t, const CandidateGrid& grid,
                        const std::string& layer_name) {
  try {
    return LayerProfiler(weight, t, grid).profile(layer_name);
  } catch (const NumericalError&) {
    throw;
  } catch (const Error& e) {
    throw ArgumentError(with_layer(layer_name, e.what()));
  }
}

std::vector<std::size_t> reference_selection(const std::vector<OptionSet>& sets, double target_cr) {
  std::vector<std::size_t> picks;
  picks.reserve(sets.size());
  for (const auto& set : sets) {
    if (set.options.empty()) throw ArgumentError(with_layer(set.layer_name, "empty option set"));
    const double target = (1.0 - target_cr) * static_cast<double>(set.dense_cost());
    std::size_t best = set.options.size();
    double best_gap = 0.0;
    for (std::size_t i = 0; i < set.options.size(); ++i) {
      if (set.options[i].dense) continue;
      const double gap = std::abs(static_cast<double>(set.options[i].cost) - target);
      // Options are sorted by cost, so strict '<' keeps the cheaper one on ties.
      if (best == set.options.size() || gap < best_gap) {
        best = i;
        best_gap = gap;
      }
    }
    if (best == set.options.size()) {
      for (std::size_t i = 0; i < set.options.size(); ++i)
        if (set.options[i].dense) best = i;
    }
    picks.push_back(best);
  }
  return picks;
}

double reference_error(const std::vector<OptionSet>& sets, double target_cr) {
  if (sets.empty()) throw ArgumentError("reference_error: no layers");
  const auto picks = reference_selection(sets, target_cr);
  double sum = 0.0;
  for (std::size_t l = 0; l < sets.size(); ++l) sum += sets[l].options[picks[l]].error;
  return sum / static_cast<double>(sets.size());
}

}  // namespace spadict
