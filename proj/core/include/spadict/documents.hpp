#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spadict/allocator.hpp"
#include "spadict/profiler.hpp"

namespace spadict {

/// Profiling output: one option set per layer plus the settings needed to
/// regenerate any candidate.
struct OptionDocument {
  std::string manifest;  // path of the profiled model manifest
  CandidateGrid grid;
  double jitter_rel = kDefaultJitterRel;
  std::int64_t total_params = 0;
  std::vector<OptionSet> layers;
};

struct PlanLayer {
  std::string name;
  std::size_t option_index = 0;
  CompressionOption option;
};

struct PlanDocument {
  std::string manifest;
  CandidateGrid grid;
  double jitter_rel = kDefaultJitterRel;
  double target_cr = 0.0;
  std::int64_t total_params = 0;
  std::int64_t budget_kept = 0;
  std::int64_t param_precision = kDefaultParamPrecision;
  double e_ref = 0.0;
  double alpha_used = 0.0;
  std::int64_t total_kept = 0;
  double total_error = 0.0;
  std::vector<PlanLayer> layers;
};

void write_options(const std::filesystem::path& path, const OptionDocument& doc);
OptionDocument read_options(const std::filesystem::path& path);

void write_plan(const std::filesystem::path& path, const PlanDocument& doc);
PlanDocument read_plan(const std::filesystem::path& path);

}  // namespace spadict
