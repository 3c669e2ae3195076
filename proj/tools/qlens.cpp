// qlens command-line front end: gen, analyze, locus, version.

#include "qlens/analysis.hpp"
#include "qlens/bundle.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

enum ExitCode : int { kOk = 0, kConfigError = 2, kInputError = 3, kSelfCheckError = 4 };

struct GenOptions {
  qlens::SynthConfig config;
  std::string mode = "random_walk";
  std::string out;
};

struct AnalyzeOptions {
  std::string bundle;
  std::string out;
  std::string config_file;
  qlens::AnalysisConfig config;
  std::string k_grid;
};

int run_gen(GenOptions& opts) {
  opts.config.drift_mode = qlens::parse_drift_mode(opts.mode);
  const auto bundle = qlens::gen_synthetic(opts.config);
  qlens::write_bundle(bundle, opts.out);
  std::cout << "wrote bundle " << opts.out << " (N=" << bundle.n_outputs
            << ", S=" << bundle.n_stages << ", M=" << bundle.n_instances << ")\n";
  return kOk;
}

// Precedence: explicit flags > config file > defaults.
qlens::AnalysisConfig effective_config(const AnalyzeOptions& opts, const CLI::App& cmd) {
  qlens::AnalysisConfig config;
  if (!opts.config_file.empty()) {
    std::ifstream in(opts.config_file);
    if (!in) throw std::invalid_argument("cannot open config file " + opts.config_file);
    nlohmann::json overrides;
    try {
      in >> overrides;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("malformed config file: ") + e.what());
    }
    qlens::apply_json(config, overrides);
  }
  const auto set = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (set("--seed")) config.seed = opts.config.seed;
  if (set("--alpha")) config.alpha = opts.config.alpha;
  if (set("--n-perm-similarity")) config.n_perm_similarity = opts.config.n_perm_similarity;
  if (set("--n-perm-scalar")) config.n_perm_scalar = opts.config.n_perm_scalar;
  if (set("--k-grid")) config.k_grid = qlens::parse_k_grid(opts.k_grid);
  if (set("--top-m")) config.top_m = opts.config.top_m;
  if (set("--dense-cap")) config.dense_cap = opts.config.dense_cap;
  if (set("--operator-cap")) config.operator_cap = opts.config.operator_cap;
  if (set("--max-iter")) config.max_iter = opts.config.max_iter;
  if (set("--cohesion-ranking")) config.cohesion_ranking = opts.config.cohesion_ranking;
  qlens::validate(config);
  return config;
}

int run_analyze(const AnalyzeOptions& opts, const CLI::App& cmd) {
  const auto config = effective_config(opts, cmd);
  qlens::TrajectoryBundle bundle;
  try {
    bundle = qlens::read_bundle(opts.bundle);
  } catch (const qlens::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  }
  const auto output = qlens::analyze(bundle, config);
  qlens::write_output(output, opts.out);
  std::cout << "wrote " << (std::filesystem::path(opts.out) / "report.json").string() << " and "
            << output.sidecars.size() << " CSV files\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qlens: state-vector analysis of layer-by-layer prediction trajectories"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Synthesize a trajectory bundle");
  gen_cmd->add_option("--n-outputs", gen.config.n_outputs, "Output units N")->capture_default_str();
  gen_cmd->add_option("--stages", gen.config.n_stages, "Probed stages S")->capture_default_str();
  gen_cmd->add_option("--instances", gen.config.n_instances, "Instances M")->capture_default_str();
  gen_cmd->add_option("--concentration", gen.config.concentration, "Dirichlet concentration")
      ->capture_default_str();
  gen_cmd->add_option("--mode", gen.mode, "random_walk | biased_arc | clustered")->capture_default_str();
  gen_cmd->add_option("--drift", gen.config.drift_strength, "Drift strength in [0, 1]")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.config.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--embedding-dim", gen.config.embedding_dim,
                      "Also write random output-unit embeddings of this width")
      ->capture_default_str();
  gen_cmd->add_flag("--labels", gen.config.token_labels, "Write unit_<k> token labels");
  gen_cmd->add_option("--out", gen.out, "Bundle directory")->required();

  AnalyzeOptions analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Analyze a bundle and write report.json + CSVs");
  analyze_cmd->add_option("bundle", analyze.bundle, "Bundle directory")->required();
  analyze_cmd->add_option("--out", analyze.out, "Report directory")->required();
  analyze_cmd->add_option("--config", analyze.config_file, "JSON config file (flags override it)");
  analyze_cmd->add_option("--seed", analyze.config.seed, "Global seed");
  analyze_cmd->add_option("--alpha", analyze.config.alpha, "Hamiltonian scale (default 1)");
  analyze_cmd->add_option("--n-perm-similarity", analyze.config.n_perm_similarity,
                          "Permutations for similarity and cohesion tests (default 100)");
  analyze_cmd->add_option("--n-perm-scalar", analyze.config.n_perm_scalar,
                          "Permutations for scalar tests (default 9999)");
  analyze_cmd->add_option("--k-grid", analyze.k_grid, "start:stop:step or list (default 5:50:5)");
  analyze_cmd->add_option("--top-m", analyze.config.top_m, "Top units per cluster (default 10)");
  analyze_cmd->add_option("--dense-cap", analyze.config.dense_cap,
                          "Largest N for dense matrices (default 4096)");
  analyze_cmd->add_option("--operator-cap", analyze.config.operator_cap,
                          "Subsample cap for pairwise statistics (default 500)");
  analyze_cmd->add_option("--max-iter", analyze.config.max_iter, "k-means iterations (default 300)");
  analyze_cmd->add_option("--cohesion-ranking", analyze.config.cohesion_ranking,
                          "gain | signed (default gain)");

  int samples = 256;
  std::string locus_out;
  auto* locus_cmd = app.add_subcommand("locus", "Emit the two-unit locus boundary as CSV");
  locus_cmd->add_option("--samples", samples, "Samples per arc")->capture_default_str();
  locus_cmd->add_option("--out", locus_out, "Output file (stdout when omitted)");

  app.add_subcommand("version", "Print the tool version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*analyze_cmd) return run_analyze(analyze, *analyze_cmd);
    if (*locus_cmd) {
      const auto csv = qlens::locus_csv(samples);
      if (locus_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(locus_out, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + locus_out);
        out << csv;
      }
      return kOk;
    }
    std::cout << "qlens " << qlens::kVersion << '\n';
    return kOk;
  } catch (const qlens::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const qlens::SelfCheckError& e) {
    std::cerr << "self-check failed: " << e.what() << '\n';
    return kSelfCheckError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
