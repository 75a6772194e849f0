#pragma once

#include <cstdint>
#include <filesystem>
#include <random>

#include "spadict/matrix.hpp"

namespace spadict::cli {

struct SyntheticSpec {
  int layers = 8;
  std::int64_t calib_rows = 256;
  std::uint64_t seed = 0;
};

/// Standard-normal matrix from a seeded engine.
Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng);

/// Weight with a decaying spectrum plus a small dense perturbation.
Matrix synthetic_weight(Index d1, Index d2, std::mt19937_64& rng);

/// Calibration activations with correlated, unevenly scaled features.
Matrix synthetic_activations(Index rows, Index d1, std::mt19937_64& rng);

/// Writes model.json, one weight tensor per layer, and activation dumps under
/// <dir>/activations. Grams are left for cmd_gram. Returns the manifest path.
std::filesystem::path write_synthetic_model(const std::filesystem::path& dir, const SyntheticSpec& spec);

}  // namespace spadict::cli
