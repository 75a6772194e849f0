#include <random>

#include <gtest/gtest.h>

#include "spadict/allocator.hpp"
#include "spadict/errors.hpp"
#include "support/oracles.hpp"

namespace spadict {
namespace {

CompressionOption option(std::int64_t cost, double error) {
  CompressionOption o;
  o.rank_k = 1;
  o.per_col_nnz = 1;
  o.cost = cost;
  o.error = error;
  return o;
}

OptionSet layer(Index d1, Index d2, std::vector<CompressionOption> opts, bool with_identity = true) {
  OptionSet s;
  s.layer_name = "layer" + std::to_string(d1) + "x" + std::to_string(d2);
  s.d1 = d1;
  s.d2 = d2;
  s.options = std::move(opts);
  if (with_identity) s.options.push_back(identity_option(d1, d2));
  return s;
}

// Plain enumeration of every selection, written independently of the library.
struct Exhaustive {
  double best_error = std::numeric_limits<double>::infinity();
  bool found = false;
};

Exhaustive enumerate(const MckpInstance& inst, double alpha) {
  Exhaustive out;
  std::vector<std::size_t> idx(inst.layers.size(), 0);
  while (true) {
    std::int64_t kept = 0;
    double err = 0.0;
    bool ok = true;
    for (std::size_t l = 0; l < idx.size(); ++l) {
      const auto& o = inst.layers[l].options[idx[l]];
      if (o.error > alpha * inst.e_ref + kCapTolerance) ok = false;
      kept += o.cost;
      err += o.error;
    }
    if (ok && kept <= inst.budget_kept && err < out.best_error) {
      out.best_error = err;
      out.found = true;
    }
    std::size_t l = 0;
    while (l < idx.size() && ++idx[l] == inst.layers[l].options.size()) idx[l++] = 0;
    if (l == idx.size()) break;
  }
  return out;
}

void expect_valid(const MckpInstance& inst, const AllocationPlan& plan) {
  ASSERT_EQ(plan.choices.size(), inst.layers.size());
  std::int64_t kept = 0;
  double err = 0.0;
  for (std::size_t l = 0; l < inst.layers.size(); ++l) {
    const auto& o = inst.layers[l].options[plan.choices[l]];
    kept += o.cost;
    err += o.error;
    EXPECT_LE(o.error, plan.alpha_used * inst.e_ref + kCapTolerance);
  }
  EXPECT_EQ(kept, plan.total_kept);
  EXPECT_LE(plan.total_kept, inst.budget_kept);
  EXPECT_NEAR(err, plan.total_error, 1e-12);
}

MckpInstance three_by_three() {
  MckpInstance inst;
  inst.layers = {
      layer(4, 4, {option(4, 0.75), option(8, 0.375), option(12, 0.125)}, false),
      layer(3, 5, {option(5, 0.625), option(9, 0.25), option(13, 0.1875)}, false),
      layer(2, 6, {option(3, 0.875), option(7, 0.5), option(10, 0.0625)}, false),
  };
  inst.budget_kept = 25;
  inst.e_ref = 0.5;
  inst.alpha = 10.0;
  inst.param_precision = inst.total_params();
  return inst;
}

TEST(MinFeasibleAlpha, SingleLayerExample) {
  MckpInstance inst;
  inst.layers = {layer(3, 4, {option(5, 0.9), option(10, 0.5)}, false)};
  inst.e_ref = 0.5;
  inst.budget_kept = 6;
  EXPECT_NEAR(min_feasible_alpha(inst), 1.8, 1e-12);
  const auto plan = solve_dp(inst);
  EXPECT_EQ(plan.choices, std::vector<std::size_t>{0});
  EXPECT_NEAR(plan.alpha_used, 1.8, 1e-12);
}

TEST(MinFeasibleAlpha, FullBudgetGivesZero) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = testing::random_instance(rng, 5, 5);
    inst.budget_kept = inst.total_params();
    EXPECT_EQ(min_feasible_alpha(inst), 0.0);
    const auto plan = solve_dp(inst);
    EXPECT_EQ(plan.total_error, 0.0);
  }
}

TEST(MinFeasibleAlpha, BinarySearchMatchesScan) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = testing::random_instance(rng, 6, 5);
    EXPECT_EQ(min_feasible_alpha(inst), testing::alpha_scan(inst)) << "trial " << trial;
  }
}

TEST(MinFeasibleAlpha, InfeasibleNamesLayer) {
  MckpInstance inst;
  inst.layers = {layer(2, 2, {option(3, 0.5)}, false), layer(5, 5, {option(20, 0.5)}, false)};
  inst.e_ref = 0.5;
  inst.budget_kept = 10;
  try {
    min_feasible_alpha(inst);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("layer5x5"), std::string::npos) << e.what();
  }
  EXPECT_THROW(solve_dp(inst), InfeasibleError);
  EXPECT_THROW(brute_force_oracle(inst), InfeasibleError);
  EXPECT_THROW(dijkstra_oracle(inst), InfeasibleError);
}

TEST(MinFeasibleAlpha, ZeroReferenceError) {
  MckpInstance inst;
  inst.layers = {layer(2, 3, {option(2, 0.4)})};
  inst.e_ref = 0.0;
  inst.budget_kept = 6;
  EXPECT_EQ(min_feasible_alpha(inst), 0.0);
  inst.budget_kept = 5;
  EXPECT_THROW(min_feasible_alpha(inst), InfeasibleError);
}

TEST(SolveDp, SingleLayerPicksMinimumError) {
  MckpInstance inst;
  inst.layers = {layer(3, 3, {option(2, 0.6), option(4, 0.3), option(6, 0.2)})};
  inst.budget_kept = 9;
  inst.e_ref = 0.3;
  inst.alpha = 100.0;
  const auto plan = solve_dp(inst);
  EXPECT_EQ(plan.choices, std::vector<std::size_t>{3});
  EXPECT_EQ(plan.total_error, 0.0);
}

TEST(SolveDp, HandInstanceMatchesEnumeration) {
  auto inst = three_by_three();
  const auto dp = solve_dp(inst);
  const auto bf = brute_force_oracle(inst);
  const auto dj = dijkstra_oracle(inst);
  expect_valid(inst, dp);
  expect_valid(inst, dj);
  EXPECT_EQ(dp.total_error, bf.total_error);
  EXPECT_EQ(dj.total_error, bf.total_error);
  inst.prune = PruneRule::none;
  EXPECT_EQ(solve_dp(inst).choices, bf.choices);
  // Under 25: (8, 9, 7) -> 1.125, (4, 9, 10) -> 1.0625, (8, 5, 10) -> 1.0625.
  EXPECT_EQ(bf.total_error, enumerate(inst, 10.0).best_error);
  EXPECT_EQ(bf.total_error, 1.0625);
  // Tie between (0,1,2) and (1,0,2): both keep 23, lexicographic order picks (0,1,2).
  EXPECT_EQ(bf.choices, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(SolveDp, TieBreakPrefersLargerKept) {
  MckpInstance inst;
  inst.layers = {layer(2, 5, {option(3, 0.5), option(6, 0.5)}, false)};
  inst.budget_kept = 8;
  inst.e_ref = 0.5;
  inst.alpha = 1.0;
  inst.param_precision = 10;
  EXPECT_EQ(brute_force_oracle(inst).choices, std::vector<std::size_t>{1});
  // Safe pruning drops the costlier of two equal-error states.
  EXPECT_EQ(solve_dp(inst).choices, std::vector<std::size_t>{0});
  inst.prune = PruneRule::none;
  EXPECT_EQ(solve_dp(inst).choices, std::vector<std::size_t>{1});
}

TEST(SolveDp, SingleOptionPerLayer) {
  MckpInstance inst;
  inst.layers = {layer(2, 2, {option(3, 0.2)}, false), layer(3, 3, {option(5, 0.4)}, false),
                 layer(4, 4, {option(7, 0.1)}, false)};
  inst.budget_kept = 15;
  inst.e_ref = 0.4;
  for (const auto& plan : {solve_dp(inst), brute_force_oracle(inst), dijkstra_oracle(inst)}) {
    EXPECT_EQ(plan.choices, (std::vector<std::size_t>{0, 0, 0}));
    EXPECT_EQ(plan.total_kept, 15);
    EXPECT_NEAR(plan.total_error, 0.7, 1e-15);
  }
}

TEST(SolveDp, ThreeSolversAgreeAtExactScale) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing::random_instance(rng, 6, 5);
    const auto dp = solve_dp(inst);
    const auto bf = brute_force_oracle(inst);
    const auto dj = dijkstra_oracle(inst);
    expect_valid(inst, dp);
    expect_valid(inst, dj);
    EXPECT_EQ(dp.total_error, bf.total_error) << "trial " << trial;
    EXPECT_EQ(dj.total_error, bf.total_error) << "trial " << trial;
    inst.prune = PruneRule::none;
    EXPECT_EQ(solve_dp(inst).choices, bf.choices) << "trial " << trial;
    EXPECT_NEAR(bf.total_error, enumerate(inst, bf.alpha_used).best_error, 1e-12);
  }
}

TEST(SolveDp, DefaultPrecisionStaysWithinDiscretizationBound) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing::random_instance(rng, 6, 5);
    for (auto& set : inst.layers)
      for (auto& o : set.options) o.cost *= 997;  // make P_total exceed the default precision
    for (auto& set : inst.layers) set.d1 *= 997;
    inst.budget_kept *= 997;
    inst.param_precision = kDefaultParamPrecision;
    inst.alpha = testing::alpha_scan(inst);
    const auto dp = solve_dp(inst);
    const auto bf = brute_force_oracle(inst);
    expect_valid(inst, dp);
    double slope = 0.0;
    for (const auto& set : inst.layers)
      for (std::size_t i = 0; i + 1 < set.options.size(); ++i) {
        const auto dc = static_cast<double>(set.options[i + 1].cost - set.options[i].cost);
        if (dc > 0) slope = std::max(slope, std::abs(set.options[i].error - set.options[i + 1].error) / dc);
      }
    const double bound = static_cast<double>(inst.layers.size()) * static_cast<double>(inst.total_params()) /
                         static_cast<double>(inst.param_precision) * slope;
    EXPECT_LE(dp.total_error, bf.total_error + bound + 1e-12) << "trial " << trial;
    EXPECT_GE(dp.total_error, bf.total_error - 1e-12);
  }
}

TEST(SolveDp, PruningRulesPreserveOptimum) {
  std::mt19937_64 rng(55);
  int cheaper_rule_mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing::random_instance(rng, 6, 5);
    inst.prune = PruneRule::safe;
    const auto safe = solve_dp(inst);
    inst.prune = PruneRule::none;
    const auto none = solve_dp(inst);
    EXPECT_EQ(safe.total_error, none.total_error) << "trial " << trial;
    expect_valid(inst, safe);
    inst.prune = PruneRule::cheaper_dominated;
    try {
      const auto cheaper = solve_dp(inst);
      expect_valid(inst, cheaper);
      EXPECT_GE(cheaper.total_error, none.total_error - 1e-12);
      if (cheaper.total_error != none.total_error) ++cheaper_rule_mismatches;
    } catch (const InfeasibleError&) {
      ++cheaper_rule_mismatches;
    }
  }
  RecordProperty("cheaper_dominated_mismatches", cheaper_rule_mismatches);
}

TEST(SolveDp, MonotoneInBudgetAndAlpha) {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = testing::random_instance(rng, 5, 5);
    inst.alpha = std::numeric_limits<double>::infinity();
    std::int64_t cheapest = 0;
    for (const auto& s : inst.layers) cheapest += s.options.front().cost;
    double prev = std::numeric_limits<double>::infinity();
    for (std::int64_t b = cheapest; b <= inst.total_params(); b += std::max<std::int64_t>(1, (inst.total_params() - cheapest) / 15)) {
      inst.budget_kept = b;
      const double e = solve_dp(inst).total_error;
      EXPECT_LE(e, prev + 1e-12);
      prev = e;
    }

    inst = testing::random_instance(rng, 5, 5);
    const double amin = min_feasible_alpha(inst);
    prev = std::numeric_limits<double>::infinity();
    for (double scale : {1.0, 1.1, 1.5, 2.0, 4.0, 100.0}) {
      inst.alpha = amin * scale;
      const auto plan = solve_dp(inst);
      expect_valid(inst, plan);
      EXPECT_LE(plan.total_error, prev + 1e-12);
      prev = plan.total_error;
    }
  }
}

TEST(SolveDp, AutoAlphaResolves) {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = testing::random_instance(rng, 6, 5);
    const auto plan = solve_dp(inst);
    EXPECT_EQ(plan.alpha_used, testing::alpha_scan(inst));
    expect_valid(inst, plan);
  }
}

TEST(SolveDp, RejectsBadInstances) {
  MckpInstance inst;
  inst.layers = {layer(2, 2, {option(3, 0.2)})};
  inst.e_ref = 0.1;
  inst.budget_kept = -1;
  EXPECT_THROW(solve_dp(inst), ArgumentError);
  inst.budget_kept = 4;
  inst.alpha = -1.0;
  EXPECT_THROW(solve_dp(inst), ArgumentError);
  inst.alpha = 1.0;
  inst.param_precision = 0;
  EXPECT_THROW(solve_dp(inst), ArgumentError);
  inst.param_precision = 10;
  inst.layers[0].options.clear();
  EXPECT_THROW(solve_dp(inst), ArgumentError);
}

TEST(BruteForce, RefusesHugeInstances) {
  MckpInstance inst;
  std::vector<CompressionOption> opts;
  for (int i = 1; i <= 10; ++i) opts.push_back(option(i, 1.0 / i));
  for (int l = 0; l < 7; ++l) inst.layers.push_back(layer(4, 4, opts));
  inst.budget_kept = inst.total_params();
  inst.e_ref = 1.0;
  EXPECT_THROW(brute_force_oracle(inst), ArgumentError);
}

TEST(EvaluateSelection, SumsInLayerOrder) {
  const auto inst = three_by_three();
  const auto plan = evaluate_selection(inst, {2, 0, 1});
  EXPECT_EQ(plan.total_kept, 12 + 5 + 7);
  EXPECT_EQ(plan.total_error, 1.25);
  EXPECT_THROW(evaluate_selection(inst, {0, 0}), ArgumentError);
  EXPECT_THROW(evaluate_selection(inst, {0, 0, 3}), ArgumentError);
}

TEST(WithinCap, Tolerance) {
  EXPECT_TRUE(within_cap(0.5, 1.0, 0.5));
  EXPECT_TRUE(within_cap(0.5 + 5e-13, 1.0, 0.5));
  EXPECT_FALSE(within_cap(0.5 + 1e-11, 1.0, 0.5));
  EXPECT_TRUE(within_cap(7.0, std::numeric_limits<double>::infinity(), 0.5));
}

}  // namespace
}  // namespace spadict
