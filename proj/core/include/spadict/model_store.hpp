#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spadict/matrix.hpp"
#include "spadict/sparse_columns.hpp"

namespace spadict {

namespace fs = std::filesystem;

enum class DType : std::uint8_t { f32 = 0, f64 = 1, sparse = 2 };

inline constexpr char kTensorMagic[8] = {'R', 'K', 'T', 'E', 'N', 'S', 'R', '\0'};
inline constexpr int kFormatVersion = 1;

struct TensorHeader {
  DType dtype = DType::f64;
  std::vector<std::uint64_t> dims;
};

// Dense tensors: header followed by the row-major payload. A 1-D tensor of
// length n loads as an n x 1 matrix.
Matrix read_tensor(const fs::path& path);
void write_tensor(const fs::path& path, const Matrix& m, DType dtype = DType::f64);
TensorHeader read_tensor_header(const fs::path& path);

// Sparse tensors: header with dtype 2 and dims (k, d2), then col_ptr (u64),
// row_idx (u32) and values (f64).
SparseColumns read_sparse(const fs::path& path);
void write_sparse(const fs::path& path, const SparseColumns& v);

struct LayerEntry {
  std::string name;
  Index d1 = 0;
  Index d2 = 0;
  std::string weight_ref;
  std::optional<std::string> gram_ref;
  // Calibration rows accumulated into the Gram, when known.
  std::optional<std::int64_t> calib_rows;
};

struct ModelManifest {
  int format_version = kFormatVersion;
  std::vector<LayerEntry> layers;
  std::int64_t total_params = 0;
  fs::path base_dir;  // refs are resolved against this directory

  fs::path resolve(const std::string& ref) const { return base_dir / ref; }
};

struct LoadedLayer {
  LayerEntry entry;
  Matrix weight;               // d1 x d2
  std::optional<Matrix> gram;  // d1 x d1
};

struct LoadedModel {
  ModelManifest manifest;
  std::vector<LoadedLayer> layers;

  const LoadedLayer& layer(const std::string& name) const;
};

/// Parses and validates the manifest only (no tensors).
ModelManifest read_manifest(const fs::path& manifest_path);
void write_manifest(const fs::path& manifest_path, const ModelManifest& manifest);

/// Loads every weight and Gram as double precision. Errors name the layer.
LoadedModel load_model(const fs::path& manifest_path);

/// Relative asymmetry ||A - A^T||_F / ||A||_F.
double asymmetry(const Matrix& a);
inline constexpr double kGramSymmetryTol = 1e-8;

// ---- compressed models ---------------------------------------------------

struct CompressedLayerData {
  std::string name;
  Index d1 = 0;
  Index d2 = 0;
  Matrix u;         // d1 x k, L^{-1} D
  SparseColumns v;  // k x d2
  bool dense = false;  // kept uncompressed; u holds W and v is empty
  std::int64_t rank_k = 0;
  std::int64_t per_col_nnz = 0;
  double error = 0.0;

  std::int64_t cost() const;
};

struct CompressedModel {
  std::vector<CompressedLayerData> layers;
  std::int64_t total_params = 0;
  double alpha_used = 0.0;

  std::int64_t total_kept() const;
};

inline constexpr const char* kCompressedManifestName = "compressed.json";

/// Writes compressed.json plus one U tensor and one sparse V file per layer
/// into `out_dir` (created if needed). Returns the manifest path.
fs::path save_compressed(const CompressedModel& model, const fs::path& out_dir);
CompressedModel load_compressed(const fs::path& dir_or_manifest);

}  // namespace spadict
