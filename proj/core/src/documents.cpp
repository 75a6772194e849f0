#include "spadict/documents.hpp"

#include <fstream>

#include <json.hpp>

#include "spadict/errors.hpp"

namespace spadict {

using json = nlohmann::json;

namespace {

json grid_to_json(const CandidateGrid& g, double jitter_rel) {
  return json{{"rank_fracs", g.rank_fracs},
              {"ks_fracs", g.ks_fracs},
              {"lambda", g.lambda},
              {"beta_margin", g.beta_margin},
              {"mu", g.mu},
              {"error_metric", std::string(to_string(g.error_metric))},
              {"mode", std::string(to_string(g.mode))},
              {"jitter_rel", jitter_rel}};
}

CandidateGrid grid_from_json(const json& j, double& jitter_rel) {
  CandidateGrid g;
  g.rank_fracs = j.at("rank_fracs").get<std::vector<double>>();
  g.ks_fracs = j.at("ks_fracs").get<std::vector<double>>();
  g.lambda = j.at("lambda").get<double>();
  g.beta_margin = j.at("beta_margin").get<double>();
  g.mu = j.at("mu").get<double>();
  g.error_metric = parse_error_metric(j.at("error_metric").get<std::string>());
  g.mode = parse_sparsify_mode(j.at("mode").get<std::string>());
  jitter_rel = j.value("jitter_rel", kDefaultJitterRel);
  g.validate();
  return g;
}

json option_to_json(const CompressionOption& o) {
  return json{{"rank_k", o.rank_k},   {"s", o.per_col_nnz}, {"cost", o.cost},  {"ks_ratio", o.ks_ratio},
              {"error", o.error},     {"whitened_error", o.whitened_error}, {"dense", o.dense}};
}

CompressionOption option_from_json(const json& j) {
  CompressionOption o;
  o.rank_k = j.at("rank_k").get<std::int64_t>();
  o.per_col_nnz = j.at("s").get<std::int64_t>();
  o.cost = j.at("cost").get<std::int64_t>();
  o.ks_ratio = j.at("ks_ratio").get<double>();
  o.error = j.at("error").get<double>();
  o.whitened_error = j.value("whitened_error", 0.0);
  o.dense = j.value("dense", false);
  return o;
}

void dump(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

json load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

void write_options(const std::filesystem::path& path, const OptionDocument& doc) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "options";
  j["manifest"] = doc.manifest;
  j["grid"] = grid_to_json(doc.grid, doc.jitter_rel);
  j["total_params"] = doc.total_params;
  j["layers"] = json::array();
  for (const auto& set : doc.layers) {
    json layer{{"name", set.layer_name}, {"d1", set.d1}, {"d2", set.d2}, {"options", json::array()}};
    for (const auto& o : set.options) layer["options"].push_back(option_to_json(o));
    j["layers"].push_back(std::move(layer));
  }
  dump(path, j);
}

OptionDocument read_options(const std::filesystem::path& path) {
  const json j = load(path);
  OptionDocument doc;
  try {
    if (j.value("kind", "") != "options") throw FormatError("'" + path.string() + "' is not an options document");
    doc.manifest = j.value("manifest", "");
    doc.grid = grid_from_json(j.at("grid"), doc.jitter_rel);
    for (const auto& layer : j.at("layers")) {
      OptionSet set;
      set.layer_name = layer.at("name").get<std::string>();
      set.d1 = layer.at("d1").get<Index>();
      set.d2 = layer.at("d2").get<Index>();
      for (const auto& o : layer.at("options")) set.options.push_back(option_from_json(o));
      if (set.options.empty()) throw FormatError(with_layer(set.layer_name, "no options"));
      doc.total_params += set.dense_cost();
      doc.layers.push_back(std::move(set));
    }
    if (j.contains("total_params") && j["total_params"].get<std::int64_t>() != doc.total_params) {
      throw FormatError("total_params does not match the layer dimensions");
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  return doc;
}

void write_plan(const std::filesystem::path& path, const PlanDocument& doc) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "plan";
  j["manifest"] = doc.manifest;
  j["grid"] = grid_to_json(doc.grid, doc.jitter_rel);
  j["target_cr"] = doc.target_cr;
  j["total_params"] = doc.total_params;
  j["budget_kept"] = doc.budget_kept;
  j["param_precision"] = doc.param_precision;
  j["e_ref"] = doc.e_ref;
  j["alpha_used"] = doc.alpha_used;
  j["total_kept"] = doc.total_kept;
  j["total_error"] = doc.total_error;
  j["layers"] = json::array();
  for (const auto& l : doc.layers) {
    json item = option_to_json(l.option);
    item["name"] = l.name;
    item["option_index"] = l.option_index;
    j["layers"].push_back(std::move(item));
  }
  dump(path, j);
}

PlanDocument read_plan(const std::filesystem::path& path) {
  const json j = load(path);
  PlanDocument doc;
  try {
    if (j.value("kind", "") != "plan") throw FormatError("'" + path.string() + "' is not a plan document");
    doc.manifest = j.value("manifest", "");
    doc.grid = grid_from_json(j.at("grid"), doc.jitter_rel);
    doc.target_cr = j.at("target_cr").get<double>();
    doc.total_params = j.at("total_params").get<std::int64_t>();
    doc.budget_kept = j.at("budget_kept").get<std::int64_t>();
    doc.param_precision = j.at("param_precision").get<std::int64_t>();
    doc.e_ref = j.at("e_ref").get<double>();
    doc.alpha_used = j.at("alpha_used").get<double>();
    doc.total_kept = j.at("total_kept").get<std::int64_t>();
    doc.total_error = j.at("total_error").get<double>();
    for (const auto& item : j.at("layers")) {
      PlanLayer l;
      l.name = item.at("name").get<std::string>();
      l.option_index = item.at("option_index").get<std::size_t>();
      l.option = option_from_json(item);
      doc.layers.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  return doc;
}

}  // namespace spadict
