#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <thread>

#include <json.hpp>

#include "spadict/errors.hpp"
#include "spadict/runtime.hpp"
#include "spadict/whitening.hpp"
#include "synthetic.hpp"

namespace spadict::cli {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first failure in
// index order is rethrown, so error reporting does not depend on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::exception_ptr> errors(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double condition_number(const Matrix& upper) {
  Eigen::JacobiSVD<Matrix> svd(upper);
  const auto& s = svd.singularValues();
  return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

}  // namespace

void RunConfig::validate() const {
  if (!(target_cr >= 0.0 && target_cr < 1.0)) throw ArgumentError("--cr must lie in [0, 1)");
  grid.validate();
  if (alpha && !(*alpha >= 0.0)) throw ArgumentError("--alpha must be >= 0 or 'auto'");
  if (param_precision < 1) throw ArgumentError("--param-precision must be positive");
  if (!(jitter_rel >= 0.0)) throw ArgumentError("jitter must be >= 0");
}

// ---- gram ----------------------------------------------------------------

std::vector<fs::path> activation_shards(const fs::path& dir, const std::string& layer) {
  std::vector<fs::path> out;
  const auto single = dir / (layer + ".act.tensor");
  if (fs::exists(single)) out.push_back(single);
  std::map<long long, fs::path> numbered;
  const std::string prefix = layer + ".act.";
  const std::string suffix = ".tensor";
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.size() <= prefix.size() + suffix.size() || name.rfind(prefix, 0) != 0 ||
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
        continue;
      }
      const auto middle = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
      if (middle.empty() || !std::all_of(middle.begin(), middle.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        continue;
      }
      numbered.emplace(std::stoll(middle), entry.path());
    }
  }
  for (auto& [i, p] : numbered) out.push_back(p);
  return out;
}

std::vector<GramSummary> cmd_gram(const fs::path& manifest_path, const fs::path& activations_dir) {
  auto manifest = read_manifest(manifest_path);
  std::vector<GramSummary> out;
  for (auto& e : manifest.layers) {
    const auto shards = activation_shards(activations_dir, e.name);
    if (shards.empty()) {
      throw ArgumentError(with_layer(e.name, "no activation dumps in '" + activations_dir.string() + "'"));
    }
    Matrix gram = Matrix::Zero(e.d1, e.d1);
    std::int64_t rows = 0;
    for (const auto& shard : shards) {
      const Matrix x = read_tensor(shard);
      if (x.cols() != e.d1) {
        throw DimensionError(with_layer(e.name, "activation dump '" + shard.filename().string() + "' has " +
                                                    std::to_string(x.cols()) + " columns, expected " +
                                                    std::to_string(e.d1)));
      }
      gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
      rows += x.rows();
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    const std::string ref = e.name + ".gram.tensor";
    write_tensor(manifest.resolve(ref), gram);
    e.gram_ref = ref;
    e.calib_rows = rows;
    out.push_back({e.name, rows, shards.size()});
  }
  write_manifest(manifest_path, manifest);
  return out;
}

// ---- profile -------------------------------------------------------------

OptionDocument cmd_profile(const fs::path& manifest_path, const RunConfig& config) {
  config.validate();
  const auto model = load_model(manifest_path);
  for (const auto& l : model.layers) {
    if (!l.gram) throw ArgumentError(with_layer(l.entry.name, "no Gram matrix; run 'gram' first"));
  }
  OptionDocument doc;
  doc.manifest = fs::absolute(manifest_path).lexically_normal().string();
  doc.grid = config.grid;
  doc.jitter_rel = config.jitter_rel;
  doc.total_params = model.manifest.total_params;
  doc.layers.resize(model.layers.size());
  parallel_for(model.layers.size(), config.threads, [&](std::size_t i) {
    const auto& l = model.layers[i];
    const auto t = build_whitener(*l.gram, config.jitter_rel, l.entry.name);
    doc.layers[i] = profile_layer(l.weight, t, config.grid, l.entry.name);
  });
  return doc;
}

// ---- allocate ------------------------------------------------------------

std::int64_t kept_budget(double target_cr, std::int64_t total_params) {
  return static_cast<std::int64_t>(std::floor((1.0 - target_cr) * static_cast<double>(total_params)));
}

PlanDocument cmd_allocate(const OptionDocument& options, const RunConfig& config) {
  config.validate();
  MckpInstance inst;
  inst.layers = options.layers;
  inst.budget_kept = kept_budget(config.target_cr, inst.total_params());
  inst.alpha = config.alpha;
  inst.param_precision = config.param_precision;
  inst.e_ref = inst.layers.empty() ? 0.0 : reference_error(inst.layers, config.target_cr);
  const auto plan = solve_dp(inst);

  PlanDocument doc;
  doc.manifest = options.manifest;
  doc.grid = options.grid;
  doc.jitter_rel = options.jitter_rel;
  doc.target_cr = config.target_cr;
  doc.total_params = inst.total_params();
  doc.budget_kept = inst.budget_kept;
  doc.param_precision = inst.param_precision;
  doc.e_ref = inst.e_ref;
  doc.alpha_used = plan.alpha_used;
  doc.total_kept = plan.total_kept;
  doc.total_error = plan.total_error;
  for (std::size_t l = 0; l < inst.layers.size(); ++l) {
    doc.layers.push_back({inst.layers[l].layer_name, plan.choices[l], inst.layers[l].options[plan.choices[l]]});
  }
  return doc;
}

void print_plan(std::ostream& out, const PlanDocument& plan) {
  out << std::left << std::setw(20) << "layer" << std::right << std::setw(8) << "k" << std::setw(8) << "s"
      << std::setw(12) << "cost" << std::setw(14) << "error" << '\n';
  for (const auto& l : plan.layers) {
    out << std::left << std::setw(20) << l.name << std::right;
    if (l.option.dense) {
      out << std::setw(8) << "dense" << std::setw(8) << "-";
    } else {
      out << std::setw(8) << l.option.rank_k << std::setw(8) << l.option.per_col_nnz;
    }
    out << std::setw(12) << l.option.cost << std::setw(14) << std::setprecision(6) << std::fixed << l.option.error
        << std::defaultfloat << '\n';
  }
  out << "budget_kept " << plan.budget_kept << "  total_kept " << plan.total_kept << " / " << plan.total_params
      << "  total_error " << plan.total_error << "  e_ref " << plan.e_ref << "  alpha " << plan.alpha_used << '\n';
}

// ---- compress ------------------------------------------------------------

CompressSummary cmd_compress(const fs::path& manifest_path, const PlanDocument& plan, const fs::path& out_dir) {
  const auto model = load_model(manifest_path);
  if (plan.layers.size() != model.layers.size()) {
    throw ArgumentError("plan has " + std::to_string(plan.layers.size()) + " layers, manifest has " +
                        std::to_string(model.layers.size()));
  }
  CompressedModel compressed;
  compressed.total_params = model.manifest.total_params;
  compressed.alpha_used = plan.alpha_used;
  compressed.layers.resize(model.layers.size());

  parallel_for(model.layers.size(), 0, [&](std::size_t i) {
    const auto& l = model.layers[i];
    const auto& choice = plan.layers[i];
    if (choice.name != l.entry.name) {
      throw ArgumentError("plan layer '" + choice.name + "' does not match manifest layer '" + l.entry.name + "'");
    }
    auto& out = compressed.layers[i];
    out.name = l.entry.name;
    out.d1 = l.entry.d1;
    out.d2 = l.entry.d2;
    out.error = choice.option.error;
    if (choice.option.dense) {
      out.dense = true;
      out.u = l.weight;
      return;
    }
    if (!l.gram) throw ArgumentError(with_layer(l.entry.name, "no Gram matrix"));
    const auto t = build_whitener(*l.gram, plan.jitter_rel, l.entry.name);
    const LayerProfiler profiler(l.weight, t, plan.grid);
    auto result = profiler.evaluate(choice.option.rank_k, choice.option.per_col_nnz);
    if (result.option.cost != choice.option.cost) {
      throw ArgumentError(with_layer(l.entry.name, "regenerated cost " + std::to_string(result.option.cost) +
                                                       " differs from the plan's " +
                                                       std::to_string(choice.option.cost)));
    }
    out.rank_k = result.option.rank_k;
    out.per_col_nnz = result.option.per_col_nnz;
    out.error = result.option.error;
    out.u = std::move(result.factors.u);
    out.v = std::move(result.factors.coeffs);
  });

  CompressSummary summary;
  summary.manifest = save_compressed(compressed, out_dir);
  summary.total_params = compressed.total_params;
  summary.total_kept = compressed.total_kept();
  summary.achieved_ratio =
      summary.total_params > 0 ? 1.0 - static_cast<double>(summary.total_kept) / static_cast<double>(summary.total_params)
                               : 0.0;
  for (const auto& l : compressed.layers) summary.layer_errors.push_back(l.error);
  return summary;
}

// ---- eval ----------------------------------------------------------------

EvalSummary cmd_eval(const fs::path& manifest_path, const fs::path& compressed_dir,
                     const std::optional<fs::path>& probe_dir, std::int64_t probe_rows, std::uint64_t seed) {
  const auto model = load_model(manifest_path);
  const auto compressed = load_compressed(compressed_dir);
  if (compressed.layers.size() != model.layers.size()) throw DimensionError("layer counts differ");
  std::mt19937_64 rng(seed);
  EvalSummary summary;
  summary.probe_rows = probe_rows;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& orig = model.layers[i];
    const auto& comp = compressed.layers[i];
    if (comp.name != orig.entry.name || comp.d1 != orig.entry.d1 || comp.d2 != orig.entry.d2) {
      throw DimensionError(with_layer(orig.entry.name, "compressed layer does not match the original"));
    }
    Matrix x;
    if (probe_dir) {
      x = read_tensor(*probe_dir / (orig.entry.name + ".act.tensor"));
      if (x.cols() != orig.entry.d1) throw DimensionError(with_layer(orig.entry.name, "probe width differs from d1"));
    } else {
      x = gaussian(static_cast<Index>(probe_rows), orig.entry.d1, rng);
    }
    const auto n = static_cast<std::int64_t>(x.rows());
    summary.probe_rows = n;

    LayerEval ev;
    ev.name = orig.entry.name;
    ev.dense_params = static_cast<std::int64_t>(orig.entry.d1) * orig.entry.d2;
    ev.dense_flops = n * ev.dense_params;
    Matrix approx;
    Matrix y;
    if (comp.dense) {
      approx = comp.u;
      y = x * comp.u;
      ev.flops = ev.dense_flops;
      ev.params = ev.dense_params;
    } else {
      const CompressedLayer layer(comp.u, comp.v);
      approx = layer.dense_weight();
      y = layer.forward(x);
      ev.flops = flop_count(layer, n);
      ev.params = layer.params();
    }
    ev.weight = error_report(orig.weight, approx);
    const Matrix reference = x * orig.weight;
    const double ref_norm = reference.norm();
    ev.activation_rel = ref_norm > 0.0 ? (reference - y).norm() / ref_norm : 0.0;
    if (orig.gram) {
      const auto t = build_whitener(*orig.gram, kDefaultJitterRel, orig.entry.name);
      ev.cond_bound = ev.weight.frobenius_rel * condition_number(t.upper);
    }
    summary.total_params += ev.dense_params;
    summary.kept_params += ev.params;
    summary.total_flops += ev.flops;
    summary.dense_flops += ev.dense_flops;
    summary.layers.push_back(std::move(ev));
  }
  return summary;
}

void print_eval(std::ostream& out, const EvalSummary& s) {
  out << std::left << std::setw(16) << "layer" << std::right << std::setw(12) << "frob_rel" << std::setw(12)
      << "l1_abs" << std::setw(12) << "cos_dist" << std::setw(12) << "spectral" << std::setw(12) << "act_rel"
      << std::setw(12) << "bound" << std::setw(12) << "params" << std::setw(14) << "flops" << '\n';
  out << std::setprecision(5);
  for (const auto& l : s.layers) {
    out << std::left << std::setw(16) << l.name << std::right << std::setw(12) << l.weight.frobenius_rel
        << std::setw(12) << l.weight.l1_abs << std::setw(12) << l.weight.mean_cos_cols << std::setw(12)
        << l.weight.spectral_abs << std::setw(12) << l.activation_rel << std::setw(12) << l.cond_bound
        << std::setw(12) << l.params << std::setw(14) << l.flops << '\n';
  }
  out << "params " << s.kept_params << " / " << s.total_params << "  flops " << s.total_flops << " / "
      << s.dense_flops << " (N = " << s.probe_rows << ")\n";
}

void write_eval_json(const fs::path& path, const EvalSummary& s) {
  nlohmann::json j;
  j["probe_rows"] = s.probe_rows;
  j["total_params"] = s.total_params;
  j["kept_params"] = s.kept_params;
  j["total_flops"] = s.total_flops;
  j["dense_flops"] = s.dense_flops;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : s.layers) {
    j["layers"].push_back({{"name", l.name},
                           {"frobenius_rel", l.weight.frobenius_rel},
                           {"l1_abs", l.weight.l1_abs},
                           {"mean_cos_cols", l.weight.mean_cos_cols},
                           {"spectral_abs", l.weight.spectral_abs},
                           {"activation_rel", l.activation_rel},
                           {"cond_bound", l.cond_bound},
                           {"params", l.params},
                           {"dense_params", l.dense_params},
                           {"flops", l.flops},
                           {"dense_flops", l.dense_flops}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace spadict::cli
