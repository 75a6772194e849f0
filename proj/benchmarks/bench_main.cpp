#include <random>

#include <benchmark/benchmark.h>

#include "spadict/allocator.hpp"
#include "spadict/profiler.hpp"
#include "spadict/runtime.hpp"
#include "spadict/sparsifier.hpp"

namespace {

using namespace spadict;

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  return Matrix::NullaryExpr(rows, cols, [&] { return dist(rng); });
}

void BM_TwoStageSparsify(benchmark::State& state) {
  const auto r = state.range(0);
  const Matrix c = gaussian(r, 2 * r, 1);
  const Matrix imp = c.cwiseAbs();
  const std::int64_t target = c.size() / 3;
  for (auto _ : state) benchmark::DoNotOptimize(two_stage_sparsify(c, imp, target));
  state.SetComplexityN(c.size());
}
BENCHMARK(BM_TwoStageSparsify)->RangeMultiplier(2)->Range(32, 256)->Complexity();

void BM_ProfileLayer(benchmark::State& state) {
  const auto d = state.range(0);
  const Matrix w = gaussian(d, 2 * d, 2);
  const Matrix x = gaussian(4 * d, d, 3);
  const auto t = build_whitener(x.transpose() * x);
  for (auto _ : state) benchmark::DoNotOptimize(profile_layer(w, t, CandidateGrid{}));
}
BENCHMARK(BM_ProfileLayer)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SolveDp(benchmark::State& state) {
  const auto layers = state.range(0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit;
  MckpInstance inst;
  for (int l = 0; l < layers; ++l) {
    OptionSet set;
    set.d1 = 512;
    set.d2 = 512;
    for (int i = 1; i <= 40; ++i) {
      CompressionOption o;
      o.rank_k = i;
      o.per_col_nnz = 1;
      o.cost = i * set.dense_cost() / 41;
      o.error = (1.0 - i / 41.0) * (0.8 + 0.4 * unit(rng));
      set.options.push_back(o);
    }
    set.options.push_back(identity_option(set.d1, set.d2));
    inst.layers.push_back(set);
  }
  inst.budget_kept = inst.total_params() * 7 / 10;
  inst.e_ref = 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(solve_dp(inst));
}
BENCHMARK(BM_SolveDp)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  const auto d = state.range(0);
  const Index k = d / 2;
  Matrix v = gaussian(k, d, 5);
  std::mt19937_64 rng(6);
  std::bernoulli_distribution keep(0.25);
  for (Index j = 0; j < v.cols(); ++j)
    for (Index i = 0; i < v.rows(); ++i)
      if (!keep(rng)) v(i, j) = 0.0;
  const CompressedLayer layer(gaussian(d, k, 7), SparseColumns::from_dense(v));
  const Matrix x = gaussian(64, d, 8);
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(x));
  state.counters["flops"] = static_cast<double>(flop_count(layer, 64));
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
