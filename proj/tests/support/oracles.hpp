#pragma once

// Test-only reference implementations. None of these call into the code path
// they are used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "spadict/allocator.hpp"
#include "spadict/matrix.hpp"

namespace spadict::testing {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

// Naive triple-loop product, independent of Eigen's GEMM kernels.
inline Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (Index p = 0; p < a.cols(); ++p) acc += static_cast<long double>(a(i, p)) * b(p, j);
      out(i, j) = static_cast<double>(acc);
    }
  return out;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double n = std::max(a.norm(), b.norm());
  return n == 0.0 ? 0.0 : (a - b).norm() / n;
}

// Smallest |<u, v>|-aligned distance: min(||u - v||, ||u + v||).
inline double sign_free_distance(const Vector& u, const Vector& v) {
  return std::min((u - v).norm(), (u + v).norm());
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("spadict_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

// Random knapsack instance: costs strictly below the dense size, one
// identity option per layer, errors decreasing with cost like real profiles.
inline MckpInstance random_instance(std::mt19937_64& rng, int max_layers, int max_options,
                                    bool with_identity = true) {
  std::uniform_int_distribution<int> layers_dist(1, max_layers);
  std::uniform_int_distribution<int> opts_dist(1, max_options);
  std::uniform_int_distribution<int> dim_dist(2, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MckpInstance inst;
  const int layers = layers_dist(rng);
  for (int l = 0; l < layers; ++l) {
    OptionSet set;
    set.layer_name = "l" + std::to_string(l);
    set.d1 = dim_dist(rng);
    set.d2 = dim_dist(rng);
    const auto dense = set.dense_cost();
    const int count = with_identity ? std::max(1, opts_dist(rng) - 1) : opts_dist(rng);
    std::vector<CompressionOption> opts;
    for (int i = 0; i < count; ++i) {
      CompressionOption o;
      o.cost = std::uniform_int_distribution<std::int64_t>(1, dense - 1)(rng);
      o.rank_k = 1;
      o.per_col_nnz = 1;
      const double frac = static_cast<double>(o.cost) / static_cast<double>(dense);
      o.error = std::clamp((1.0 - frac) * (0.6 + 0.8 * unit(rng)), 0.0, 1.0);
      opts.push_back(o);
    }
    if (with_identity) opts.push_back(identity_option(set.d1, set.d2));
    std::sort(opts.begin(), opts.end(), [](const auto& a, const auto& b) { return a.cost < b.cost; });
    set.options = std::move(opts);
    inst.layers.push_back(std::move(set));
  }
  const auto total = inst.total_params();
  std::int64_t cheapest = 0;
  for (const auto& set : inst.layers) cheapest += set.options.front().cost;
  inst.budget_kept = std::uniform_int_distribution<std::int64_t>(cheapest, total)(rng);
  double sum = 0.0;
  for (const auto& set : inst.layers) sum += set.options[set.options.size() / 2].error;
  inst.e_ref = std::max(1e-3, sum / static_cast<double>(inst.layers.size()));
  inst.param_precision = total;
  return inst;
}

// Exhaustive scan over every candidate ratio, smallest feasible first.
inline double alpha_scan(const MckpInstance& inst) {
  std::vector<double> candidates;
  for (const auto& set : inst.layers)
    for (const auto& o : set.options) candidates.push_back(o.error / inst.e_ref);
  std::sort(candidates.begin(), candidates.end());
  for (double alpha : candidates) {
    std::int64_t sum = 0;
    bool ok = true;
    for (const auto& set : inst.layers) {
      std::int64_t best = -1;
      for (const auto& o : set.options)
        if (o.error <= alpha * inst.e_ref + kCapTolerance && (best < 0 || o.cost < best)) best = o.cost;
      if (best < 0) {
        ok = false;
        break;
      }
      sum += best;
    }
    if (ok && sum <= inst.budget_kept) return alpha;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace spadict::testing
