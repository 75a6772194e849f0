#include <cstring>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "spadict/errors.hpp"
#include "spadict/model_store.hpp"
#include "spadict/runtime.hpp"
#include "support/oracles.hpp"

namespace spadict {
namespace {

using testing::TempDir;

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  out << j.dump();
}

TEST(TensorFile, HeaderLayoutIsLittleEndianRowMajor) {
  TempDir dir("tensor");
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  write_tensor(dir.path / "m.tensor", m);
  const auto bytes = slurp(dir.path / "m.tensor");
  ASSERT_EQ(bytes.size(), 8u + 1 + 1 + 2 * 8 + 6 * 8);
  EXPECT_EQ(std::memcmp(bytes.data(), "RKTENSR\0", 8), 0);
  EXPECT_EQ(bytes[8], 1);  // f64
  EXPECT_EQ(bytes[9], 2);  // ndim
  std::uint64_t d0, d1;
  std::memcpy(&d0, bytes.data() + 10, 8);
  std::memcpy(&d1, bytes.data() + 18, 8);
  EXPECT_EQ(d0, 2u);
  EXPECT_EQ(d1, 3u);
  double second;
  std::memcpy(&second, bytes.data() + 26 + 8, 8);
  EXPECT_EQ(second, 2.0);  // row-major: (0, 1) follows (0, 0)
}

TEST(TensorFile, Float32RoundTripWidensToDouble) {
  TempDir dir("f32");
  std::mt19937_64 rng(3);
  const Matrix m = testing::random_matrix(5, 4, rng);
  write_tensor(dir.path / "m.tensor", m, DType::f32);
  const Matrix back = read_tensor(dir.path / "m.tensor");
  EXPECT_EQ(back, m.cast<float>().cast<double>());
}

TEST(TensorFile, OneDimensionalLoadsAsColumn) {
  TempDir dir("vec");
  const std::vector<char> header = {'R', 'K', 'T', 'E', 'N', 'S', 'R', '\0', 1, 1, 3, 0, 0, 0, 0, 0, 0, 0};
  std::vector<char> bytes = header;
  for (double v : {1.5, -2.0, 4.0}) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    bytes.insert(bytes.end(), buf, buf + 8);
  }
  spit(dir.path / "v.tensor", bytes);
  const Matrix v = read_tensor(dir.path / "v.tensor");
  ASSERT_EQ(v.rows(), 3);
  ASSERT_EQ(v.cols(), 1);
  EXPECT_EQ(v(1, 0), -2.0);
}

TEST(TensorFile, RejectsBadMagicAndTruncation) {
  TempDir dir("bad");
  write_tensor(dir.path / "m.tensor", Matrix::Ones(2, 2));
  auto bytes = slurp(dir.path / "m.tensor");
  auto corrupt = bytes;
  corrupt[0] = 'X';
  spit(dir.path / "magic.tensor", corrupt);
  EXPECT_THROW(read_tensor(dir.path / "magic.tensor"), FormatError);
  bytes.pop_back();
  spit(dir.path / "short.tensor", bytes);
  EXPECT_THROW(read_tensor(dir.path / "short.tensor"), FormatError);
  EXPECT_THROW(read_tensor(dir.path / "missing.tensor"), FormatError);
}

SparseColumns sample_sparse() {
  Matrix dense(4, 3);
  dense << 1, 0, 0,
           0, 2, 0,
           3, 0, 0,
           0, 4, 5;
  return SparseColumns::from_dense(dense);
}

TEST(SparseFile, RoundTripIsExact) {
  TempDir dir("sparse");
  const auto v = sample_sparse();
  write_sparse(dir.path / "v.sparse", v);
  EXPECT_EQ(read_sparse(dir.path / "v.sparse"), v);
  const auto bytes = slurp(dir.path / "v.sparse");
  EXPECT_EQ(bytes[8], 2);  // sparse dtype code
  EXPECT_EQ(bytes.size(), 8u + 2 + 16 + 4 * 8 + 5 * 4 + 5 * 8);
}

// Every single-byte corruption and every truncation must either fail to
// parse or yield a structurally valid matrix; none may crash or mis-index.
TEST(SparseFile, FuzzedCorruptionIsRejectedOrValid) {
  TempDir dir("fuzz");
  write_sparse(dir.path / "v.sparse", sample_sparse());
  const auto bytes = slurp(dir.path / "v.sparse");
  std::mt19937_64 rng(11);
  int rejected = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    auto mutated = bytes;
    const auto pos = std::uniform_int_distribution<std::size_t>(0, bytes.size() - 1)(rng);
    mutated[pos] = static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng));
    if (trial % 7 == 0) mutated.resize(std::uniform_int_distribution<std::size_t>(0, bytes.size())(rng));
    spit(dir.path / "f.sparse", mutated);
    try {
      const auto v = read_sparse(dir.path / "f.sparse");
      EXPECT_NO_THROW(v.validate());
      if (v.rows * v.cols <= 1'000'000) EXPECT_NO_THROW(v.to_dense());
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  EXPECT_GT(rejected, 0);
}

TEST(SparseFile, ValidateCatchesEachInvariant) {
  auto v = sample_sparse();
  auto bad = v;
  bad.col_ptr[0] = 1;
  EXPECT_THROW(bad.validate(), FormatError);
  bad = v;
  std::swap(bad.row_idx[0], bad.row_idx[1]);  // column 0 rows become 2, 0
  EXPECT_THROW(bad.validate(), FormatError);
  bad = v;
  bad.row_idx[0] = 4;
  EXPECT_THROW(bad.validate(), FormatError);
  bad = v;
  bad.col_ptr[1] = 3;
  bad.col_ptr[2] = 2;
  EXPECT_THROW(bad.validate(), FormatError);
}

class ManifestTest : public ::testing::Test {
 protected:
  TempDir dir{"manifest"};

  fs::path write_model(const Matrix& w, const std::optional<Matrix>& gram, Index d1, Index d2) {
    write_tensor(dir.path / "w.tensor", w, DType::f32);
    nlohmann::json layer{{"name", "proj"}, {"d1", d1}, {"d2", d2}, {"weight_ref", "w.tensor"}};
    if (gram) {
      write_tensor(dir.path / "g.tensor", *gram);
      layer["gram_ref"] = "g.tensor";
    }
    write_json(dir.path / "model.json", {{"format_version", 1}, {"layers", {layer}}});
    return dir.path / "model.json";
  }
};

TEST_F(ManifestTest, CountsTotalParams) {
  const auto model = load_model(write_model(Matrix::Ones(2, 3), std::nullopt, 2, 3));
  EXPECT_EQ(model.manifest.total_params, 6);
  EXPECT_EQ(model.layers.at(0).weight.rows(), 2);
  EXPECT_FALSE(model.layers.at(0).gram.has_value());
}

TEST_F(ManifestTest, DimMismatchNamesTheLayer) {
  try {
    load_model(write_model(Matrix::Ones(2, 3), std::nullopt, 3, 2));
    FAIL() << "expected a dimension error";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("proj"), std::string::npos);
  }
}

TEST_F(ManifestTest, RejectsAsymmetricGram) {
  Matrix g = Matrix::Identity(2, 2);
  g(0, 1) = 0.5;
  try {
    load_model(write_model(Matrix::Ones(2, 3), g, 2, 3));
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("proj"), std::string::npos);
  }
}

TEST_F(ManifestTest, RejectsDuplicateNamesAndBadJson) {
  write_tensor(dir.path / "w.tensor", Matrix::Ones(1, 1));
  nlohmann::json layer{{"name", "a"}, {"d1", 1}, {"d2", 1}, {"weight_ref", "w.tensor"}};
  write_json(dir.path / "dup.json", {{"format_version", 1}, {"layers", {layer, layer}}});
  EXPECT_THROW(read_manifest(dir.path / "dup.json"), FormatError);
  std::ofstream(dir.path / "broken.json") << "{ not json";
  EXPECT_THROW(read_manifest(dir.path / "broken.json"), FormatError);
  EXPECT_THROW(read_manifest(dir.path / "absent.json"), FormatError);
}

CompressedModel synthetic_compressed(std::mt19937_64& rng, int layers) {
  CompressedModel model;
  for (int l = 0; l < layers; ++l) {
    CompressedLayerData d;
    d.name = "layer/" + std::to_string(l);
    d.d1 = 6 + l;
    d.d2 = 5 + 2 * l;
    if (l == 2) {
      d.dense = true;
      d.u = testing::random_matrix(d.d1, d.d2, rng);
    } else {
      d.rank_k = 3;
      d.u = testing::random_matrix(d.d1, 3, rng);
      Matrix c = testing::random_matrix(3, d.d2, rng);
      for (Index j = 0; j < c.cols(); ++j) c(j % 3, j) = 0.0;
      d.v = SparseColumns::from_dense(c);
    }
    model.total_params += static_cast<std::int64_t>(d.d1) * d.d2;
    model.layers.push_back(std::move(d));
  }
  return model;
}

TEST(Compressed, CostIsDictionaryPlusNonzeros) {
  CompressedLayerData d;
  d.d1 = 4;
  d.d2 = 3;
  d.u = Matrix::Ones(4, 2);
  Matrix c(2, 3);
  c << 1, 2, 0,
       3, 4, 5;
  d.v = SparseColumns::from_dense(c);
  EXPECT_EQ(d.cost(), 13);
}

TEST(Compressed, EmptyModelIsValid) {
  TempDir dir("empty");
  CompressedModel model;
  save_compressed(model, dir.path / "out");
  const auto back = load_compressed(dir.path / "out");
  EXPECT_TRUE(back.layers.empty());
  EXPECT_EQ(back.total_kept(), 0);
}

TEST(Compressed, RoundTripIsBitExactAndForwardAgrees) {
  TempDir dir("roundtrip");
  std::mt19937_64 rng(5);
  const auto model = synthetic_compressed(rng, 4);
  save_compressed(model, dir.path / "a");
  const auto back = load_compressed(dir.path / "a");
  ASSERT_EQ(back.layers.size(), model.layers.size());
  EXPECT_EQ(back.total_kept(), model.total_kept());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    EXPECT_EQ(back.layers[i].u, model.layers[i].u);
    EXPECT_EQ(back.layers[i].v, model.layers[i].v);
    if (!model.layers[i].dense) {
      const Matrix x = testing::random_matrix(7, model.layers[i].d1, rng);
      const CompressedLayer a(model.layers[i].u, model.layers[i].v);
      const CompressedLayer b(back.layers[i].u, back.layers[i].v);
      EXPECT_EQ(a.forward(x), b.forward(x));
    }
  }
  // Saving the loaded copy reproduces every file byte for byte.
  save_compressed(back, dir.path / "b");
  for (const auto& entry : fs::directory_iterator(dir.path / "a")) {
    EXPECT_EQ(slurp(entry.path()), slurp(dir.path / "b" / entry.path().filename())) << entry.path();
  }
}

TEST(Compressed, RejectsCostTampering) {
  TempDir dir("tamper");
  std::mt19937_64 rng(6);
  save_compressed(synthetic_compressed(rng, 2), dir.path);
  std::ifstream in(dir.path / kCompressedManifestName);
  auto j = nlohmann::json::parse(in);
  in.close();
  j["layers"][0]["cost"] = 1;
  write_json(dir.path / kCompressedManifestName, j);
  EXPECT_THROW(load_compressed(dir.path), FormatError);
}

TEST(Compressed, UnwritableDirectoryFails) {
  TempDir dir("ro");
  std::ofstream(dir.path / "file") << "x";
  EXPECT_THROW(save_compressed(CompressedModel{}, dir.path / "file" / "sub"), Error);
}

}  // namespace
}  // namespace spadict
