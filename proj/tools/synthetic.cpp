#include "synthetic.hpp"

#include <array>
#include <cmath>
#include <string>

#include "spadict/errors.hpp"
#include "spadict/model_store.hpp"

namespace spadict::cli {

namespace {

constexpr std::array<std::pair<Index, Index>, 8> kShapes{{
    {32, 64}, {64, 48}, {48, 96}, {96, 64}, {64, 128}, {128, 96}, {96, 32}, {64, 64},
}};

}  // namespace

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Matrix synthetic_weight(Index d1, Index d2, std::mt19937_64& rng) {
  const Index m = std::min(d1, d2);
  Vector decay(m);
  for (Index i = 0; i < m; ++i) decay(i) = 1.0 / std::pow(1.0 + static_cast<double>(i), 0.8);
  const Matrix left = gaussian(d1, m, rng);
  const Matrix right = gaussian(m, d2, rng);
  const Matrix noise = gaussian(d1, d2, rng);
  return (left * decay.asDiagonal() * right) / std::sqrt(static_cast<double>(m)) + 0.05 * noise;
}

Matrix synthetic_activations(Index rows, Index d1, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> log_scale(std::log(0.1), std::log(3.0));
  Vector scales(d1);
  for (Index i = 0; i < d1; ++i) scales(i) = std::exp(log_scale(rng));
  const Matrix mixing =
      (Matrix::Identity(d1, d1) + 0.3 * gaussian(d1, d1, rng) / std::sqrt(static_cast<double>(d1))) *
      scales.asDiagonal();
  return gaussian(rows, d1, rng) * mixing;
}

std::filesystem::path write_synthetic_model(const std::filesystem::path& dir, const SyntheticSpec& spec) {
  if (spec.layers < 1) throw ArgumentError("synthetic model needs at least one layer");
  if (spec.calib_rows < 1) throw ArgumentError("synthetic model needs at least one calibration row");
  std::filesystem::create_directories(dir / "activations");
  std::mt19937_64 rng(spec.seed);
  ModelManifest manifest;
  for (int l = 0; l < spec.layers; ++l) {
    const auto [d1, d2] = kShapes[static_cast<std::size_t>(l) % kShapes.size()];
    const std::string name = "layer" + std::to_string(l);
    const Matrix w = synthetic_weight(d1, d2, rng);
    const Matrix x = synthetic_activations(static_cast<Index>(spec.calib_rows), d1, rng);
    LayerEntry e;
    e.name = name;
    e.d1 = d1;
    e.d2 = d2;
    e.weight_ref = name + ".weight.tensor";
    write_tensor(dir / e.weight_ref, w, DType::f32);
    write_tensor(dir / "activations" / (name + ".act.tensor"), x, DType::f32);
    manifest.total_params += static_cast<std::int64_t>(d1) * d2;
    manifest.layers.push_back(std::move(e));
  }
  const auto path = dir / "model.json";
  write_manifest(path, manifest);
  return path;
}

}  // namespace spadict::cli
