#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "spadict/profiler.hpp"

namespace spadict {

inline constexpr std::int64_t kDefaultParamPrecision = 100000;
inline constexpr double kCapTolerance = 1e-12;

/// Which DP frontier entries get discarded after each layer.
enum class PruneRule {
  none,
  // Drop (k1, e1) when some (k2, e2) has k2 <= k1 and e2 <= e1.
  safe,
  // Drop (k1, e1) when some (k2, e2) has k1 < k2 and e1 >= e2. Discards the
  // cheaper state and can lose feasibility under a tight budget.
  cheaper_dominated,
};

struct MckpInstance {
  std::vector<OptionSet> layers;
  std::int64_t budget_kept = 0;
  std::optional<double> alpha;  // nullopt resolves to the minimal feasible alpha
  double e_ref = 0.0;
  std::int64_t param_precision = kDefaultParamPrecision;
  PruneRule prune = PruneRule::safe;

  std::int64_t total_params() const;
};

struct AllocationPlan {
  std::vector<std::size_t> choices;  // option index per layer
  std::int64_t total_kept = 0;
  double total_error = 0.0;
  double alpha_used = 0.0;
};

/// True when `error` passes the cap alpha * e_ref.
bool within_cap(double error, double alpha, double e_ref);

/// Smallest alpha among {e / e_ref} for which the cheapest cap-passing option
/// of every layer fits the budget together. Binary search over the sorted
/// candidates. With e_ref == 0 only zero-error options pass and the result is
/// 0 when that is feasible. Throws InfeasibleError naming the layer whose
/// cheapest option overshoots the budget the most.
double min_feasible_alpha(const MckpInstance& inst);

/// Scaled-cost dynamic program with dominated-state pruning. Exact unscaled
/// costs ride along with every state and decide the final budget check.
AllocationPlan solve_dp(const MckpInstance& inst);

/// Exhaustive enumeration with exact costs. Refuses instances with more than
/// 1e6 selections.
AllocationPlan brute_force_oracle(const MckpInstance& inst);

/// Shortest path over the layered graph of (layer, scaled kept) nodes; a
/// terminal node reaches the sink only if its exact kept count fits the budget.
AllocationPlan dijkstra_oracle(const MckpInstance& inst);

/// Exact kept parameters and summed error of a selection.
AllocationPlan evaluate_selection(const MckpInstance& inst, const std::vector<std::size_t>& choices);

}  // namespace spadict
