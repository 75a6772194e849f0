#include "spadict/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>

#include "spadict/errors.hpp"

namespace spadict {

namespace {

constexpr std::int64_t kBruteForceLimit = 1'000'000;

__extension__ typedef __int128 wide_int;

struct Choice {
  std::size_t option;
  std::int64_t cost;
  std::int64_t scaled;
  double error;
};

// floor(cost * precision / total) without floating-point rounding.
std::int64_t scale_cost(std::int64_t cost, std::int64_t precision, std::int64_t total) {
  return static_cast<std::int64_t>((static_cast<wide_int>(cost) * precision) / total);
}

void check_instance(const MckpInstance& inst) {
  for (const auto& set : inst.layers) {
    if (set.options.empty()) throw ArgumentError(with_layer(set.layer_name, "empty option set"));
    for (const auto& o : set.options) {
      if (o.cost < 0) throw ArgumentError(with_layer(set.layer_name, "negative option cost"));
      if (!(o.error >= 0.0) || !std::isfinite(o.error)) {
        throw ArgumentError(with_layer(set.layer_name, "option errors must be finite and >= 0"));
      }
    }
  }
  if (inst.budget_kept < 0) throw ArgumentError("budget must be >= 0");
  if (!(inst.e_ref >= 0.0)) throw ArgumentError("reference error must be >= 0");
  if (inst.alpha && !(*inst.alpha >= 0.0)) throw ArgumentError("alpha must be >= 0");
}

double resolve_alpha(const MckpInstance& inst) { return inst.alpha ? *inst.alpha : min_feasible_alpha(inst); }

// Cap-passing options of every layer, in option order.
std::vector<std::vector<Choice>> admissible(const MckpInstance& inst, double alpha) {
  const auto total = inst.total_params();
  std::vector<std::vector<Choice>> out(inst.layers.size());
  for (std::size_t l = 0; l < inst.layers.size(); ++l) {
    const auto& set = inst.layers[l];
    for (std::size_t i = 0; i < set.options.size(); ++i) {
      const auto& o = set.options[i];
      if (!within_cap(o.error, alpha, inst.e_ref)) continue;
      out[l].push_back({i, o.cost, scale_cost(o.cost, inst.param_precision, total), o.error});
    }
    if (out[l].empty()) {
      std::ostringstream msg;
      msg << "no option passes the cap " << alpha << " x " << inst.e_ref;
      throw InfeasibleError(with_layer(set.layer_name, msg.str()));
    }
  }
  return out;
}

// Cheapest cap-passing cost per layer, or -1 when a layer has none.
std::vector<std::int64_t> cheapest_costs(const MckpInstance& inst, double alpha) {
  std::vector<std::int64_t> out;
  out.reserve(inst.layers.size());
  for (const auto& set : inst.layers) {
    std::int64_t best = -1;
    for (const auto& o : set.options) {
      if (within_cap(o.error, alpha, inst.e_ref) && (best < 0 || o.cost < best)) best = o.cost;
    }
    out.push_back(best);
  }
  return out;
}

bool feasible_at(const MckpInstance& inst, double alpha) {
  std::int64_t sum = 0;
  for (auto c : cheapest_costs(inst, alpha)) {
    if (c < 0) return false;
    sum += c;
  }
  return sum <= inst.budget_kept;
}

[[noreturn]] void report_infeasible(const MckpInstance& inst, double alpha) {
  const auto costs = cheapest_costs(inst, alpha);
  std::int64_t sum = 0;
  std::size_t worst = 0;
  double worst_share = -1.0;
  for (std::size_t l = 0; l < costs.size(); ++l) {
    if (costs[l] < 0) {
      throw InfeasibleError(with_layer(inst.layers[l].layer_name, "no option passes the error cap"));
    }
    sum += costs[l];
    const double share = static_cast<double>(costs[l]) / static_cast<double>(std::max<std::int64_t>(1, inst.layers[l].dense_cost()));
    if (share > worst_share) {
      worst_share = share;
      worst = l;
    }
  }
  std::ostringstream msg;
  msg << "cheapest selection keeps " << sum << " parameters, budget is " << inst.budget_kept
      << "; least compressible layer is '" << (inst.layers.empty() ? std::string() : inst.layers[worst].layer_name)
      << "' (cheapest option keeps " << worst_share * 100.0 << "% of its weights)";
  throw InfeasibleError(msg.str());
}

AllocationPlan finish(const MckpInstance& inst, std::vector<std::size_t> choices, double alpha) {
  auto plan = evaluate_selection(inst, choices);
  plan.alpha_used = alpha;
  if (plan.total_kept > inst.budget_kept) throw Error("internal: selected plan exceeds the budget");
  return plan;
}

}  // namespace

std::int64_t MckpInstance::total_params() const {
  std::int64_t total = 0;
  for (const auto& set : layers) total += set.dense_cost();
  return total;
}

bool within_cap(double error, double alpha, double e_ref) {
  if (std::isinf(alpha)) return true;
  return error <= alpha * e_ref + kCapTolerance;
}

AllocationPlan evaluate_selection(const MckpInstance& inst, const std::vector<std::size_t>& choices) {
  if (choices.size() != inst.layers.size()) throw ArgumentError("selection length does not match the layer count");
  AllocationPlan plan;
  plan.choices = choices;
  for (std::size_t l = 0; l < choices.size(); ++l) {
    const auto& opts = inst.layers[l].options;
    if (choices[l] >= opts.size()) throw ArgumentError(with_layer(inst.layers[l].layer_name, "option index out of range"));
    plan.total_kept += opts[choices[l]].cost;
    plan.total_error += opts[choices[l]].error;
  }
  return plan;
}

double min_feasible_alpha(const MckpInstance& inst) {
  check_instance(inst);
  if (inst.layers.empty()) return 0.0;
  if (inst.e_ref == 0.0) {
    if (!feasible_at(inst, 0.0)) report_infeasible(inst, 0.0);
    return 0.0;
  }
  std::vector<double> candidates;
  for (const auto& set : inst.layers)
    for (const auto& o : set.options) candidates.push_back(o.error / inst.e_ref);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  if (!feasible_at(inst, candidates.back())) report_infeasible(inst, std::numeric_limits<double>::infinity());
  // Feasibility is monotone in alpha: find the first feasible candidate.
  std::size_t lo = 0;
  std::size_t hi = candidates.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (feasible_at(inst, candidates[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return candidates[lo];
}

AllocationPlan solve_dp(const MckpInstance& inst) {
  check_instance(inst);
  const auto layer_count = inst.layers.size();
  const double alpha = resolve_alpha(inst);
  if (layer_count == 0) return finish(inst, {}, alpha);
  if (inst.param_precision < static_cast<std::int64_t>(layer_count)) {
    throw ArgumentError("param_precision must be at least the number of layers");
  }
  const auto options = admissible(inst, alpha);
  const auto total = inst.total_params();
  const std::int64_t limit =
      scale_cost(inst.budget_kept, inst.param_precision, total) + static_cast<std::int64_t>(layer_count);

  struct State {
    std::int64_t key;
    std::int64_t exact;
    double error;
    std::int32_t parent;
    std::int32_t option;
  };
  std::vector<std::vector<State>> frontiers(layer_count + 1);
  frontiers[0].push_back({0, 0, 0.0, -1, -1});

  std::vector<std::int32_t> cell(static_cast<std::size_t>(limit) + 1, -1);
  std::vector<std::int64_t> touched;

  // Choice prefix of a state in frontiers[depth], oldest layer first.
  auto prefix = [&](std::size_t depth, std::int32_t idx, std::int32_t last) {
    std::vector<std::int32_t> out(depth + 1);
    out[depth] = last;
    for (std::size_t l = depth; l > 0; --l) {
      const auto& s = frontiers[l][static_cast<std::size_t>(idx)];
      out[l - 1] = s.option;
      idx = s.parent;
    }
    return out;
  };

  for (std::size_t l = 0; l < layer_count; ++l) {
    const auto& prev = frontiers[l];
    std::vector<State> next;
    touched.clear();
    for (std::size_t p = 0; p < prev.size(); ++p) {
      const auto& s = prev[p];
      for (const auto& c : options[l]) {
        const std::int64_t key = s.key + c.scaled;
        if (key > limit) continue;
        const State cand{key, s.exact + c.cost, s.error + c.error, static_cast<std::int32_t>(p),
                         static_cast<std::int32_t>(c.option)};
        auto& slot = cell[static_cast<std::size_t>(key)];
        if (slot < 0) {
          slot = static_cast<std::int32_t>(next.size());
          next.push_back(cand);
          touched.push_back(key);
          continue;
        }
        auto& cur = next[static_cast<std::size_t>(slot)];
        if (cand.error < cur.error || (cand.error == cur.error && cand.exact < cur.exact)) {
          cur = cand;
        } else if (cand.error == cur.error && cand.exact == cur.exact &&
                   prefix(l, cand.parent, cand.option) < prefix(l, cur.parent, cur.option)) {
          cur = cand;
        }
      }
    }
    for (auto key : touched) cell[static_cast<std::size_t>(key)] = -1;
    std::sort(next.begin(), next.end(), [](const State& a, const State& b) { return a.key < b.key; });

    if (inst.prune == PruneRule::safe) {
      std::vector<State> kept;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : next) {
        if (s.error < best) {
          kept.push_back(s);
          best = s.error;
        }
      }
      next = std::move(kept);
    } else if (inst.prune == PruneRule::cheaper_dominated) {
      std::vector<State> kept;
      double best = std::numeric_limits<double>::infinity();
      for (auto it = next.rbegin(); it != next.rend(); ++it) {
        if (it->error < best) {
          kept.push_back(*it);
          best = it->error;
        }
      }
      std::reverse(kept.begin(), kept.end());
      next = std::move(kept);
    }
    frontiers[l + 1] = std::move(next);
  }

  auto backtrack = [&](std::size_t idx) {
    std::vector<std::size_t> choices(layer_count);
    for (std::size_t l = layer_count; l > 0; --l) {
      const auto& s = frontiers[l][idx];
      choices[l - 1] = static_cast<std::size_t>(s.option);
      idx = static_cast<std::size_t>(s.parent);
    }
    return choices;
  };

  const auto& terminal = frontiers[layer_count];
  std::int64_t best = -1;
  std::vector<std::size_t> best_choices;
  for (std::size_t i = 0; i < terminal.size(); ++i) {
    const auto& s = terminal[i];
    if (s.exact > inst.budget_kept) continue;
    if (best >= 0) {
      const auto& b = terminal[static_cast<std::size_t>(best)];
      if (s.error > b.error) continue;
      if (s.error == b.error) {
        if (s.exact < b.exact) continue;
        if (s.exact == b.exact) {
          auto choices = backtrack(i);
          if (!(choices < best_choices)) continue;
          best = static_cast<std::int64_t>(i);
          best_choices = std::move(choices);
          continue;
        }
      }
    }
    best = static_cast<std::int64_t>(i);
    best_choices = backtrack(i);
  }
  if (best < 0) {
    throw InfeasibleError("dynamic program found no selection within the budget of " +
                          std::to_string(inst.budget_kept) + " kept parameters");
  }
  return finish(inst, std::move(best_choices), alpha);
}

AllocationPlan brute_force_oracle(const MckpInstance& inst) {
  check_instance(inst);
  std::int64_t combos = 1;
  for (const auto& set : inst.layers) {
    combos *= static_cast<std::int64_t>(set.options.size());
    if (combos > kBruteForceLimit) throw ArgumentError("instance too large for exhaustive enumeration");
  }
  const double alpha = resolve_alpha(inst);
  const auto layer_count = inst.layers.size();
  if (layer_count == 0) return finish(inst, {}, alpha);
  const auto options = admissible(inst, alpha);

  std::vector<std::size_t> digit(layer_count, 0);
  std::vector<std::size_t> best_choices;
  double best_error = std::numeric_limits<double>::infinity();
  std::int64_t best_kept = -1;
  while (true) {
    std::int64_t kept = 0;
    double error = 0.0;
    for (std::size_t l = 0; l < layer_count; ++l) {
      kept += options[l][digit[l]].cost;
      error += options[l][digit[l]].error;
    }
    // Enumeration is lexicographic, so the first of several full ties wins.
    if (kept <= inst.budget_kept && (error < best_error || (error == best_error && kept > best_kept))) {
      best_error = error;
      best_kept = kept;
      best_choices.resize(layer_count);
      for (std::size_t l = 0; l < layer_count; ++l) best_choices[l] = options[l][digit[l]].option;
    }
    std::size_t l = layer_count;
    while (l > 0) {
      --l;
      if (++digit[l] < options[l].size()) break;
      digit[l] = 0;
      if (l == 0) {
        l = layer_count + 1;
        break;
      }
    }
    if (l == layer_count + 1) break;
  }
  if (best_kept < 0) throw InfeasibleError("no selection fits the budget of " + std::to_string(inst.budget_kept));
  return finish(inst, std::move(best_choices), alpha);
}

AllocationPlan dijkstra_oracle(const MckpInstance& inst) {
  check_instance(inst);
  const auto layer_count = inst.layers.size();
  const double alpha = resolve_alpha(inst);
  if (layer_count == 0) return finish(inst, {}, alpha);
  if (inst.param_precision < static_cast<std::int64_t>(layer_count)) {
    throw ArgumentError("param_precision must be at least the number of layers");
  }
  const auto options = admissible(inst, alpha);
  const auto total = inst.total_params();
  const std::int64_t limit =
      scale_cost(inst.budget_kept, inst.param_precision, total) + static_cast<std::int64_t>(layer_count);

  struct Node {
    std::size_t layer;
    std::int64_t key;
    double dist;
    std::int64_t exact;
    std::int64_t parent;
    std::size_t option;
    bool settled;
  };
  std::vector<Node> nodes;
  std::map<std::pair<std::size_t, std::int64_t>, std::size_t> index;
  using Entry = std::tuple<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;

  nodes.push_back({0, 0, 0.0, 0, -1, 0, false});
  index[{0, 0}] = 0;
  queue.emplace(0.0, 0);

  std::int64_t sink_parent = -1;
  while (!queue.empty()) {
    const auto [dist, id] = queue.top();
    queue.pop();
    if (nodes[id].settled || dist > nodes[id].dist) continue;
    nodes[id].settled = true;
    const auto layer = nodes[id].layer;
    if (layer == layer_count) {
      // Terminal nodes reach the sink through a zero-cost edge iff they fit.
      if (nodes[id].exact <= inst.budget_kept) {
        sink_parent = static_cast<std::int64_t>(id);
        break;
      }
      continue;
    }
    for (const auto& c : options[layer]) {
      const std::int64_t key = nodes[id].key + c.scaled;
      if (key > limit) continue;
      const double nd = nodes[id].dist + c.error;
      const std::int64_t ne = nodes[id].exact + c.cost;
      auto [it, inserted] = index.emplace(std::make_pair(layer + 1, key), nodes.size());
      if (inserted) {
        nodes.push_back({layer + 1, key, nd, ne, static_cast<std::int64_t>(id), c.option, false});
        queue.emplace(nd, it->second);
      } else {
        auto& n = nodes[it->second];
        if (!n.settled && nd < n.dist) {
          n.dist = nd;
          n.exact = ne;
          n.parent = static_cast<std::int64_t>(id);
          n.option = c.option;
          queue.emplace(nd, it->second);
        }
      }
    }
  }
  if (sink_parent < 0) throw InfeasibleError("sink unreachable: no path fits the budget");

  std::vector<std::size_t> choices(layer_count);
  for (auto id = sink_parent; nodes[static_cast<std::size_t>(id)].parent >= 0;
       id = nodes[static_cast<std::size_t>(id)].parent) {
    const auto& n = nodes[static_cast<std::size_t>(id)];
    choices[n.layer - 1] = n.option;
  }
  return finish(inst, std::move(choices), alpha);
}

}  // namespace spadict
