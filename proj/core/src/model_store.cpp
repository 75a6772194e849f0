#include "spadict/model_store.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spadict/errors.hpp"

namespace spadict {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts are not supported");

namespace {

constexpr std::size_t kMagicSize = sizeof(kTensorMagic);
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 40;

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Reader {
 public:
  Reader(const std::vector<char>& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  template <typename T>
  T get() {
    T value;
    need(sizeof(T));
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
  void get_array(T* out, std::size_t count) {
    need(count * sizeof(T));
    std::memcpy(out, bytes_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("'" + path_.string() + "': " + what);
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) fail("truncated file");
  }

  const std::vector<char>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

class Writer {
 public:
  explicit Writer(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
  }

  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  template <typename T>
  void put_array(const T* data, std::size_t count) {
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  }

  void finish() {
    out_.flush();
    if (!out_) throw Error("write failed for '" + path_.string() + "'");
  }

 private:
  const fs::path& path_;
  std::ofstream out_;
};

TensorHeader parse_header(Reader& r) {
  char magic[kMagicSize];
  r.get_array(magic, kMagicSize);
  if (std::memcmp(magic, kTensorMagic, kMagicSize) != 0) r.fail("magic mismatch");
  TensorHeader h;
  const auto code = r.get<std::uint8_t>();
  if (code > 2) r.fail("unknown dtype code " + std::to_string(code));
  h.dtype = static_cast<DType>(code);
  const auto ndim = r.get<std::uint8_t>();
  if (ndim != 1 && ndim != 2) r.fail("ndim must be 1 or 2, got " + std::to_string(ndim));
  h.dims.resize(ndim);
  for (auto& d : h.dims) d = r.get<std::uint64_t>();
  return h;
}

void put_header(Writer& w, DType dtype, std::initializer_list<std::uint64_t> dims) {
  w.put_array(kTensorMagic, kMagicSize);
  w.put(static_cast<std::uint8_t>(dtype));
  w.put(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) w.put(d);
}

std::uint64_t checked_product(Reader& r, const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) {
    if (d != 0 && n > kMaxElements / d) r.fail("tensor too large");
    n *= d;
  }
  return n;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (auto& c : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

}  // namespace

TensorHeader read_tensor_header(const fs::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes, path);
  return parse_header(r);
}

Matrix read_tensor(const fs::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes, path);
  const auto h = parse_header(r);
  if (h.dtype == DType::sparse) r.fail("expected a dense tensor, found a sparse one");
  const auto count = checked_product(r, h.dims);
  const std::size_t elem = h.dtype == DType::f32 ? sizeof(float) : sizeof(double);
  if (r.remaining() != count * elem) {
    r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, header implies " +
           std::to_string(count * elem));
  }
  const auto rows = static_cast<Index>(h.dims[0]);
  const auto cols = h.dims.size() == 2 ? static_cast<Index>(h.dims[1]) : Index{1};
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
  if (h.dtype == DType::f64) {
    r.get_array(m.data(), count);
  } else {
    std::vector<float> tmp(count);
    r.get_array(tmp.data(), count);
    std::copy(tmp.begin(), tmp.end(), m.data());
  }
  return m;
}

void write_tensor(const fs::path& path, const Matrix& m, DType dtype) {
  if (dtype == DType::sparse) throw ArgumentError("write_tensor cannot emit sparse tensors");
  Writer w(path);
  put_header(w, dtype, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())});
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  if (dtype == DType::f64) {
    w.put_array(rm.data(), static_cast<std::size_t>(rm.size()));
  } else {
    std::vector<float> tmp(rm.data(), rm.data() + rm.size());
    w.put_array(tmp.data(), tmp.size());
  }
  w.finish();
}

SparseColumns read_sparse(const fs::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes, path);
  const auto h = parse_header(r);
  if (h.dtype != DType::sparse) r.fail("expected a sparse tensor (dtype 2)");
  if (h.dims.size() != 2) r.fail("sparse tensor must be 2-D");
  const auto k = h.dims[0];
  const auto d2 = h.dims[1];
  if (k > std::numeric_limits<std::uint32_t>::max()) r.fail("row count exceeds 32-bit index range");
  if (d2 >= kMaxElements) r.fail("tensor too large");
  const auto ptr_bytes = (d2 + 1) * sizeof(std::uint64_t);
  if (r.remaining() < ptr_bytes) r.fail("truncated col_ptr");
  SparseColumns v;
  v.rows = static_cast<Index>(k);
  v.cols = static_cast<Index>(d2);
  v.col_ptr.resize(d2 + 1);
  r.get_array(v.col_ptr.data(), v.col_ptr.size());
  const auto nnz = v.col_ptr.back();
  const auto per_entry = sizeof(std::uint32_t) + sizeof(double);
  if (nnz > r.remaining() / per_entry || r.remaining() != nnz * per_entry) {
    r.fail("payload size does not match col_ptr[d2] = " + std::to_string(nnz));
  }
  v.row_idx.resize(nnz);
  v.values.resize(nnz);
  r.get_array(v.row_idx.data(), nnz);
  r.get_array(v.values.data(), nnz);
  try {
    v.validate();
  } catch (const FormatError& e) {
    r.fail(e.what());
  }
  return v;
}

void write_sparse(const fs::path& path, const SparseColumns& v) {
  v.validate();
  Writer w(path);
  put_header(w, DType::sparse, {static_cast<std::uint64_t>(v.rows), static_cast<std::uint64_t>(v.cols)});
  w.put_array(v.col_ptr.data(), v.col_ptr.size());
  w.put_array(v.row_idx.data(), v.row_idx.size());
  w.put_array(v.values.data(), v.values.size());
  w.finish();
}

double asymmetry(const Matrix& a) {
  const double norm = a.norm();
  if (norm == 0.0) return 0.0;
  return (a - a.transpose()).norm() / norm;
}

// ---- manifests -----------------------------------------------------------

ModelManifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open manifest '" + manifest_path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("manifest '" + manifest_path.string() + "' is not valid JSON: " + e.what());
  }
  ModelManifest m;
  m.base_dir = manifest_path.parent_path();
  try {
    m.format_version = doc.at("format_version").get<int>();
    if (m.format_version != kFormatVersion) {
      throw FormatError("unsupported manifest format_version " + std::to_string(m.format_version));
    }
    std::set<std::string> names;
    for (const auto& item : doc.at("layers")) {
      LayerEntry e;
      e.name = item.at("name").get<std::string>();
      const auto d1 = item.at("d1").get<std::int64_t>();
      const auto d2 = item.at("d2").get<std::int64_t>();
      if (d1 < 1 || d2 < 1) throw FormatError(with_layer(e.name, "dimensions must be >= 1"));
      e.d1 = static_cast<Index>(d1);
      e.d2 = static_cast<Index>(d2);
      e.weight_ref = item.at("weight_ref").get<std::string>();
      if (item.contains("gram_ref") && !item["gram_ref"].is_null()) {
        e.gram_ref = item["gram_ref"].get<std::string>();
      }
      if (item.contains("calib_rows") && !item["calib_rows"].is_null()) {
        e.calib_rows = item["calib_rows"].get<std::int64_t>();
      }
      if (!names.insert(e.name).second) throw FormatError("duplicate layer name '" + e.name + "'");
      m.total_params += static_cast<std::int64_t>(e.d1) * e.d2;
      m.layers.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  return m;
}

void write_manifest(const fs::path& manifest_path, const ModelManifest& manifest) {
  json doc;
  doc["format_version"] = manifest.format_version;
  doc["layers"] = json::array();
  for (const auto& e : manifest.layers) {
    json item{{"name", e.name}, {"d1", e.d1}, {"d2", e.d2}, {"weight_ref", e.weight_ref}};
    item["gram_ref"] = e.gram_ref ? json(*e.gram_ref) : json(nullptr);
    if (e.calib_rows) item["calib_rows"] = *e.calib_rows;
    doc["layers"].push_back(std::move(item));
  }
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest '" + manifest_path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed for '" + manifest_path.string() + "'");
}

const LoadedLayer& LoadedModel::layer(const std::string& name) const {
  for (const auto& l : layers)
    if (l.entry.name == name) return l;
  throw ArgumentError("no layer named '" + name + "'");
}

LoadedModel load_model(const fs::path& manifest_path) {
  LoadedModel model;
  model.manifest = read_manifest(manifest_path);
  model.layers.reserve(model.manifest.layers.size());
  for (const auto& e : model.manifest.layers) {
    LoadedLayer layer;
    layer.entry = e;
    try {
      layer.weight = read_tensor(model.manifest.resolve(e.weight_ref));
    } catch (const FormatError& err) {
      throw FormatError(with_layer(e.name, err.what()));
    }
    if (layer.weight.rows() != e.d1 || layer.weight.cols() != e.d2) {
      throw DimensionError(with_layer(
          e.name, "weight is " + std::to_string(layer.weight.rows()) + "x" + std::to_string(layer.weight.cols()) +
                      ", manifest says " + std::to_string(e.d1) + "x" + std::to_string(e.d2)));
    }
    if (e.gram_ref) {
      Matrix gram;
      try {
        gram = read_tensor(model.manifest.resolve(*e.gram_ref));
      } catch (const FormatError& err) {
        throw FormatError(with_layer(e.name, err.what()));
      }
      if (gram.rows() != e.d1 || gram.cols() != e.d1) {
        throw DimensionError(with_layer(e.name, "Gram must be " + std::to_string(e.d1) + "x" + std::to_string(e.d1)));
      }
      if (asymmetry(gram) > kGramSymmetryTol) {
        throw FormatError(with_layer(e.name, "Gram matrix is not symmetric"));
      }
      layer.gram = std::move(gram);
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

// ---- compressed models ---------------------------------------------------

std::int64_t CompressedLayerData::cost() const {
  if (dense) return static_cast<std::int64_t>(d1) * d2;
  return static_cast<std::int64_t>(u.size()) + v.nnz();
}

std::int64_t CompressedModel::total_kept() const {
  std::int64_t total = 0;
  for (const auto& l : layers) total += l.cost();
  return total;
}

fs::path save_compressed(const CompressedModel& model, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create '" + out_dir.string() + "': " + ec.message());

  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = "compressed";
  doc["total_params"] = model.total_params;
  doc["total_kept"] = model.total_kept();
  doc["alpha_used"] = model.alpha_used;
  doc["layers"] = json::array();
  std::set<std::string> names;
  std::size_t index = 0;
  for (const auto& l : model.layers) {
    if (!names.insert(l.name).second) throw ArgumentError("duplicate layer name '" + l.name + "'");
    std::ostringstream stem;
    stem << index++ << '_' << sanitize(l.name);
    json item{{"name", l.name}, {"d1", l.d1}, {"d2", l.d2}, {"dense", l.dense}, {"cost", l.cost()},
              {"error", l.error}};
    const std::string u_ref = stem.str() + ".u.tensor";
    if (l.dense) {
      if (l.u.rows() != l.d1 || l.u.cols() != l.d2) throw DimensionError(with_layer(l.name, "dense weight shape"));
      item["rank_k"] = 0;
      item["s"] = 0;
      item["nnz"] = 0;
      item["u_ref"] = u_ref;
      item["v_ref"] = nullptr;
      write_tensor(out_dir / u_ref, l.u);
    } else {
      if (l.u.rows() != l.d1 || l.v.cols != l.d2 || l.u.cols() != l.v.rows) {
        throw DimensionError(with_layer(l.name, "factor shapes do not chain"));
      }
      if (l.v.rows > static_cast<Index>(std::numeric_limits<std::uint32_t>::max())) {
        throw ArgumentError(with_layer(l.name, "rank exceeds the 32-bit row index range"));
      }
      const std::string v_ref = stem.str() + ".v.sparse";
      item["rank_k"] = l.rank_k;
      item["s"] = l.per_col_nnz;
      item["nnz"] = l.v.nnz();
      item["u_ref"] = u_ref;
      item["v_ref"] = v_ref;
      write_tensor(out_dir / u_ref, l.u);
      write_sparse(out_dir / v_ref, l.v);
    }
    doc["layers"].push_back(std::move(item));
  }
  const auto manifest_path = out_dir / kCompressedManifestName;
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + manifest_path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed for '" + manifest_path.string() + "'");
  return manifest_path;
}

CompressedModel load_compressed(const fs::path& dir_or_manifest) {
  const fs::path manifest_path =
      fs::is_directory(dir_or_manifest) ? dir_or_manifest / kCompressedManifestName : dir_or_manifest;
  const fs::path base = manifest_path.parent_path();
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open '" + manifest_path.string() + "'");
  CompressedModel model;
  try {
    const json doc = json::parse(in);
    if (doc.at("format_version").get<int>() != kFormatVersion || doc.value("kind", "") != "compressed") {
      throw FormatError("'" + manifest_path.string() + "' is not a compressed manifest");
    }
    model.total_params = doc.at("total_params").get<std::int64_t>();
    model.alpha_used = doc.value("alpha_used", 0.0);
    for (const auto& item : doc.at("layers")) {
      CompressedLayerData l;
      l.name = item.at("name").get<std::string>();
      l.d1 = item.at("d1").get<Index>();
      l.d2 = item.at("d2").get<Index>();
      l.dense = item.at("dense").get<bool>();
      l.rank_k = item.at("rank_k").get<std::int64_t>();
      l.per_col_nnz = item.at("s").get<std::int64_t>();
      l.error = item.value("error", 0.0);
      try {
        l.u = read_tensor(base / item.at("u_ref").get<std::string>());
        if (!l.dense) l.v = read_sparse(base / item.at("v_ref").get<std::string>());
      } catch (const FormatError& e) {
        throw FormatError(with_layer(l.name, e.what()));
      }
      if (l.dense ? (l.u.rows() != l.d1 || l.u.cols() != l.d2)
                  : (l.u.rows() != l.d1 || l.u.cols() != l.v.rows || l.v.cols != l.d2)) {
        throw DimensionError(with_layer(l.name, "stored factor shapes disagree with the manifest"));
      }
      if (item.at("cost").get<std::int64_t>() != l.cost()) {
        throw FormatError(with_layer(l.name, "recorded cost does not match the stored factors"));
      }
      model.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + manifest_path.string() + "': " + e.what());
  }
  return model;
}

}  // namespace spadict
