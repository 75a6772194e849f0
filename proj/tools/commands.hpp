#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spadict/allocator.hpp"
#include "spadict/dict_refit.hpp"
#include "spadict/documents.hpp"
#include "spadict/model_store.hpp"
#include "spadict/profiler.hpp"

namespace spadict::cli {

namespace fs = std::filesystem;

inline constexpr double kDefaultTargetCr = 0.3;

struct RunConfig {
  double target_cr = kDefaultTargetCr;
  CandidateGrid grid;
  std::optional<double> alpha;  // nullopt = auto
  std::int64_t param_precision = kDefaultParamPrecision;
  double jitter_rel = kDefaultJitterRel;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// ---- gram ----------------------------------------------------------------

struct GramSummary {
  std::string layer;
  std::int64_t rows = 0;
  std::size_t shards = 0;
};

/// Reads <name>.act.tensor or <name>.act.<i>.tensor dumps (N x d1) for every
/// layer, writes <name>.gram.tensor next to the manifest and points the
/// manifest at it.
std::vector<GramSummary> cmd_gram(const fs::path& manifest_path, const fs::path& activations_dir);

/// Sorted activation dump files for one layer.
std::vector<fs::path> activation_shards(const fs::path& dir, const std::string& layer);

// ---- profile -------------------------------------------------------------

OptionDocument cmd_profile(const fs::path& manifest_path, const RunConfig& config);

// ---- allocate ------------------------------------------------------------

/// budget_kept = floor((1 - target_cr) * P_total).
std::int64_t kept_budget(double target_cr, std::int64_t total_params);

PlanDocument cmd_allocate(const OptionDocument& options, const RunConfig& config);
void print_plan(std::ostream& out, const PlanDocument& plan);

// ---- compress ------------------------------------------------------------

struct CompressSummary {
  fs::path manifest;
  std::int64_t total_params = 0;
  std::int64_t total_kept = 0;
  double achieved_ratio = 0.0;
  std::vector<double> layer_errors;
};

/// Regenerates the chosen candidate of every layer and saves the factors.
CompressSummary cmd_compress(const fs::path& manifest_path, const PlanDocument& plan, const fs::path& out_dir);

// ---- eval ----------------------------------------------------------------

struct LayerEval {
  std::string name;
  ErrorReport weight;
  double activation_rel = 0.0;
  double cond_bound = 0.0;  // frobenius_rel * cond(R); only meaningful on calibration inputs
  std::int64_t flops = 0;
  std::int64_t dense_flops = 0;
  std::int64_t params = 0;
  std::int64_t dense_params = 0;
};

struct EvalSummary {
  std::vector<LayerEval> layers;
  std::int64_t probe_rows = 0;
  std::int64_t total_params = 0;
  std::int64_t kept_params = 0;
  std::int64_t total_flops = 0;
  std::int64_t dense_flops = 0;
};

/// Probe inputs come from <probe_dir>/<name>.act.tensor when given, otherwise
/// `probe_rows` Gaussian rows drawn from `seed`.
EvalSummary cmd_eval(const fs::path& manifest_path, const fs::path& compressed_dir,
                     const std::optional<fs::path>& probe_dir, std::int64_t probe_rows, std::uint64_t seed);
void print_eval(std::ostream& out, const EvalSummary& summary);
void write_eval_json(const fs::path& path, const EvalSummary& summary);

}  // namespace spadict::cli
