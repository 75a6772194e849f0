#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "spadict/errors.hpp"
#include "synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace spadict;
  using namespace spadict::cli;

  CLI::App app{"Training-free weight compression: whitened sparse dictionaries with knapsack budget allocation"};
  app.set_config("--config", "", "TOML/INI file with option defaults");
  app.fallthrough();
  app.require_subcommand(1);

  RunConfig config;
  std::string alpha_text = "auto";
  std::string metric_text{to_string(config.grid.error_metric)};
  std::string mode_text{to_string(config.grid.mode)};
  app.add_option("--cr", config.target_cr, "Target compression ratio (fraction of parameters removed)")
      ->capture_default_str();
  app.add_option("--rank-grid", config.grid.rank_fracs, "Rank fractions, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--ks-grid", config.grid.ks_fracs, "Per-column sparsity fractions of the rank (must include 1)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--lambda", config.grid.lambda, "Importance balance in [0, 1]")->capture_default_str();
  app.add_option("--beta", config.grid.beta_margin, "Reactivation margin as a fraction of entries")
      ->capture_default_str();
  app.add_option("--mu", config.grid.mu, "Ridge weight of the dictionary refit")->capture_default_str();
  app.add_option("--param-precision", config.param_precision, "Allocator cost resolution")->capture_default_str();
  app.add_option("--error-metric", metric_text, "frobenius_rel | l1_abs | mean_cos_cols | spectral_abs")
      ->capture_default_str();
  app.add_option("--mode", mode_text, "column_two_stage | per_row | global | whitened_only")->capture_default_str();
  app.add_option("--alpha", alpha_text, "Per-layer error cap multiplier, or 'auto'")->capture_default_str();
  app.add_option("--seed", config.seed, "Seed for synthetic data and random probes")->capture_default_str();
  app.add_option("--jitter", config.jitter_rel, "Relative Cholesky jitter")->capture_default_str();
  app.add_option("--threads", config.threads, "Worker threads (0 = all cores)")->capture_default_str();

  std::string manifest, activations, options_path, plan_path, out_path, compressed_dir, probe_dir, json_path;
  int synth_layers = 8;
  std::int64_t calib_rows = 256;
  std::int64_t probe_rows = 64;

  auto* synth = app.add_subcommand("synth", "Write a random synthetic model with calibration activations");
  synth->add_option("--out", out_path, "Output directory")->required();
  synth->add_option("--layers", synth_layers, "Number of layers")->capture_default_str();
  synth->add_option("--rows", calib_rows, "Calibration rows per layer")->capture_default_str();

  auto* gram = app.add_subcommand("gram", "Accumulate per-layer Gram matrices from activation dumps");
  gram->add_option("--manifest", manifest, "Model manifest")->required();
  gram->add_option("--activations", activations, "Directory of <layer>.act[.<i>].tensor dumps")->required();

  auto* profile = app.add_subcommand("profile", "Profile every layer over the candidate grid");
  profile->add_option("--manifest", manifest, "Model manifest")->required();
  profile->add_option("--out", out_path, "Options JSON to write")->required();

  auto* allocate = app.add_subcommand("allocate", "Solve the budget allocation over profiled options");
  allocate->add_option("--options", options_path, "Options JSON from 'profile'")->required();
  allocate->add_option("--out", out_path, "Plan JSON to write")->required();

  auto* compress = app.add_subcommand("compress", "Write the compressed model chosen by a plan");
  compress->add_option("--manifest", manifest, "Model manifest")->required();
  compress->add_option("--plan", plan_path, "Plan JSON from 'allocate'")->required();
  compress->add_option("--out", out_path, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Compare a compressed model against the original");
  eval->add_option("--manifest", manifest, "Original model manifest")->required();
  eval->add_option("--compressed", compressed_dir, "Compressed model directory")->required();
  eval->add_option("--probe-dir", probe_dir, "Directory of <layer>.act.tensor probe inputs");
  eval->add_option("--rows", probe_rows, "Random probe rows when no probe directory is given")->capture_default_str();
  eval->add_option("--json", json_path, "Also write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    config.grid.error_metric = parse_error_metric(metric_text);
    config.grid.mode = parse_sparsify_mode(mode_text);
    if (alpha_text == "auto") {
      config.alpha.reset();
    } else {
      std::size_t used = 0;
      config.alpha = std::stod(alpha_text, &used);
      if (used != alpha_text.size()) throw ArgumentError("--alpha must be a number or 'auto'");
    }

    if (*synth) {
      const auto path = write_synthetic_model(out_path, {synth_layers, calib_rows, config.seed});
      std::cout << "wrote " << path.string() << '\n';
    } else if (*gram) {
      for (const auto& g : cmd_gram(manifest, activations)) {
        std::cout << g.layer << ": N = " << g.rows << " from " << g.shards << " shard(s)\n";
      }
    } else if (*profile) {
      const auto doc = cmd_profile(manifest, config);
      write_options(out_path, doc);
      std::size_t count = 0;
      for (const auto& set : doc.layers) count += set.options.size();
      std::cout << "profiled " << doc.layers.size() << " layers, " << count << " options -> " << out_path << '\n';
    } else if (*allocate) {
      const auto plan = cmd_allocate(read_options(options_path), config);
      write_plan(out_path, plan);
      print_plan(std::cout, plan);
    } else if (*compress) {
      const auto summary = cmd_compress(manifest, read_plan(plan_path), out_path);
      std::cout << "kept " << summary.total_kept << " / " << summary.total_params << " parameters, achieved ratio "
                << summary.achieved_ratio << " -> " << summary.manifest.string() << '\n';
    } else if (*eval) {
      std::optional<std::filesystem::path> probes;
      if (!probe_dir.empty()) probes = probe_dir;
      const auto summary = cmd_eval(manifest, compressed_dir, probes, probe_rows, config.seed);
      print_eval(std::cout, summary);
      if (!json_path.empty()) write_eval_json(json_path, summary);
    }
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}
