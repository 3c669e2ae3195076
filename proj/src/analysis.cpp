#include "qlens/analysis.hpp"

#include "qlens/geometry.hpp"
#include "qlens/operators.hpp"
#include "qlens/random.hpp"
#include "qlens/statevec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace qlens {

using nlohmann::json;

namespace {

// Task tags for seed partitioning; each randomized step gets its own stream.
enum SeedTask : std::uint64_t {
  kControlOperators = 1,
  kUnitaryTest,
  kHamiltonianTest,
  kControlDeltas,
  kDeltaTest,
  kHouseholderElbow,
  kHouseholderCohesion,
  kDeltaElbow,
  kDeltaCohesion,
  kDcorSubsample,
  kDcorTest,
};

std::uint64_t task_seed(const AnalysisConfig& config, std::size_t scope, SeedTask task) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(scope) * 64 + task);
}

json test_json(const PermutationTestResult& t) {
  return {{"observed", t.observed},
          {"p_value", t.p_value},
          {"n_permutations", t.n_permutations},
          {"exceedances", t.exceedances},
          {"seed", t.seed},
          {"alternative", to_string(t.alternative)}};
}

json skipped(const std::string& reason) { return {{"status", "skipped"}, {"reason", reason}}; }

std::string file_tag(std::size_t layer, const std::string& name) {
  std::string tag = "layer" + std::to_string(layer) + "_";
  for (char ch : name) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
    tag += keep ? ch : '_';
  }
  return tag;
}

void check_finite(const json& node, const std::string& path) {
  if (node.is_number_float() && !std::isfinite(node.get<double>()))
    throw SelfCheckError("non-finite number in report at " + path);
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) check_finite(value, path + "/" + key);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) check_finite(node[i], path + "/" + std::to_string(i));
  }
}

std::vector<Eigen::Index> grid_up_to(const std::vector<Eigen::Index>& grid, Eigen::Index limit) {
  std::vector<Eigen::Index> out;
  std::copy_if(grid.begin(), grid.end(), std::back_inserter(out),
               [&](Eigen::Index k) { return k <= limit; });
  return out;
}

struct ClusterSection {
  json summary;
  std::vector<Eigen::Index> labels;  // empty when clustering was skipped
  std::string inertia_csv;
};

ClusterSection cluster_vectors(const MatrixXd& vectors, const TrajectoryBundle& bundle,
                               const AnalysisConfig& config, GainRanking ranking,
                               std::uint64_t elbow_seed, std::uint64_t cohesion_seed) {
  ClusterSection section;
  const auto grid = grid_up_to(config.k_grid, vectors.rows());
  if (grid.size() < 3) {
    section.summary = skipped("insufficient vectors for elbow selection (" +
                              std::to_string(vectors.rows()) + " vectors)");
    return section;
  }
  const auto elbow = elbow_select_k(vectors, grid, elbow_seed, config.max_iter);
  const auto& model = elbow.selected();
  section.labels = model.assignments;

  json curve = json::array();
  std::ostringstream csv;
  csv << "k,inertia\n";
  for (std::size_t i = 0; i < elbow.k_values.size(); ++i) {
    curve.push_back({{"k", elbow.k_values[i]}, {"inertia", elbow.inertias[i]}});
    csv << elbow.k_values[i] << ',' << format_number(elbow.inertias[i]) << '\n';
  }
  section.inertia_csv = csv.str();

  section.summary = {{"status", "ok"},
                     {"n_vectors", vectors.rows()},
                     {"k", model.k},
                     {"inertia", model.inertia},
                     {"iterations", model.iterations},
                     {"cluster_sizes", model.sizes()},
                     {"inertia_curve", curve}};

  if (!bundle.embeddings) {
    section.summary["cohesion"] = skipped("cohesion analysis unavailable: bundle has no embeddings");
    return section;
  }
  const auto cohesion = cohesion_permutation_test(model, vectors, *bundle.embeddings, ranking,
                                                  config.n_perm_similarity, cohesion_seed,
                                                  config.top_m);
  json clusters = json::array();
  for (const auto& c : cohesion.per_cluster)
    clusters.push_back({{"cluster", c.cluster}, {"top_units", c.top_units}, {"cohesion", c.cohesion}});
  section.summary["cohesion"] = {{"status", "ok"},
                                 {"mean_cohesion", cohesion.mean_cohesion},
                                 {"n_skipped_clusters", cohesion.n_skipped},
                                 {"per_cluster", clusters},
                                 {"test", test_json(*cohesion.test)}};
  return section;
}

std::string projection_csv(const MatrixXd& vectors, const std::vector<Eigen::Index>& instances,
                           const std::vector<Eigen::Index>& labels, json& summary) {
  if (vectors.rows() < 2) {
    summary = skipped("projection needs at least 2 vectors");
    return {};
  }
  const auto projection = pca_project(vectors, 2);
  summary = {{"status", "ok"},
             {"method", "pca"},
             {"explained_variance",
              std::vector<double>(projection.explained_variance.begin(),
                                  projection.explained_variance.end())}};
  std::ostringstream csv;
  csv << "instance,pc1,pc2,cluster\n";
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    csv << instances[static_cast<std::size_t>(i)] << ',' << format_number(projection.coordinates(i, 0))
        << ',' << format_number(projection.coordinates(i, 1)) << ',';
    if (!labels.empty()) csv << labels[static_cast<std::size_t>(i)];
    csv << '\n';
  }
  return csv.str();
}

// Fitted quantities for one stage transition.
struct LayerFit {
  std::vector<Householder> ops;
  MatrixXd deltas;  // spectral route, one row per instance
};

}  // namespace

std::string format_number(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

void validate(const AnalysisConfig& c) {
  if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) throw std::invalid_argument("alpha must be positive");
  if (c.n_perm_similarity < 1 || c.n_perm_scalar < 1)
    throw std::invalid_argument("permutation counts must be positive");
  if (c.k_grid.size() < 3) throw std::invalid_argument("k grid needs at least 3 values");
  for (std::size_t i = 0; i < c.k_grid.size(); ++i) {
    if (c.k_grid[i] < 1) throw std::invalid_argument("k grid values must be positive");
    if (i > 0 && c.k_grid[i] <= c.k_grid[i - 1])
      throw std::invalid_argument("k grid must be strictly ascending");
  }
  if (c.top_m < 2) throw std::invalid_argument("top_m must be at least 2");
  if (c.dense_cap < 1) throw std::invalid_argument("dense_cap must be positive");
  if (c.operator_cap < 2) throw std::invalid_argument("operator_cap must be at least 2");
  if (c.max_iter < 1) throw std::invalid_argument("max_iter must be positive");
  if (c.cohesion_ranking != "gain" && c.cohesion_ranking != "signed")
    throw std::invalid_argument("cohesion_ranking must be \"gain\" or \"signed\"");
}

json to_json(const AnalysisConfig& c) {
  return {{"seed", c.seed},
          {"alpha", c.alpha},
          {"n_perm_similarity", c.n_perm_similarity},
          {"n_perm_scalar", c.n_perm_scalar},
          {"k_grid", c.k_grid},
          {"top_m", c.top_m},
          {"dense_cap", c.dense_cap},
          {"operator_cap", c.operator_cap},
          {"max_iter", c.max_iter},
          {"cohesion_ranking", c.cohesion_ranking}};
}

void apply_json(AnalysisConfig& c, const json& overrides) {
  if (!overrides.is_object()) throw std::invalid_argument("config file must hold a JSON object");
  try {
    for (const auto& [key, value] : overrides.items()) {
      if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "n_perm_similarity") c.n_perm_similarity = value.get<std::int64_t>();
      else if (key == "n_perm_scalar") c.n_perm_scalar = value.get<std::int64_t>();
      else if (key == "k_grid")
        c.k_grid = value.is_string() ? parse_k_grid(value.get<std::string>())
                                     : value.get<std::vector<Eigen::Index>>();
      else if (key == "top_m") c.top_m = value.get<Eigen::Index>();
      else if (key == "dense_cap") c.dense_cap = value.get<Eigen::Index>();
      else if (key == "operator_cap") c.operator_cap = value.get<std::size_t>();
      else if (key == "max_iter") c.max_iter = value.get<int>();
      else if (key == "cohesion_ranking") c.cohesion_ranking = value.get<std::string>();
      else throw std::invalid_argument("unknown config key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
}

std::vector<Eigen::Index> parse_k_grid(const std::string& text) {
  const auto to_index = [&](const std::string& part) {
    std::size_t used = 0;
    long long value = 0;
    try {
      value = std::stoll(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) throw std::invalid_argument("bad k grid \"" + text + "\"");
    return static_cast<Eigen::Index>(value);
  };
  std::vector<Eigen::Index> grid;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw std::invalid_argument("k grid range must be start:stop:step");
    const auto start = to_index(parts[0]);
    const auto stop = to_index(parts[1]);
    const auto step = to_index(parts[2]);
    if (step < 1 || start < 1 || stop < start) throw std::invalid_argument("bad k grid range \"" + text + "\"");
    for (auto k = start; k <= stop; k += step) grid.push_back(k);
  } else {
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ',');) grid.push_back(to_index(part));
  }
  return grid;
}

std::string locus_csv(int samples_per_arc) {
  std::ostringstream csv;
  csv << "arc,index,x,y\n";
  for (const auto& arc : geometry::locus_boundary(samples_per_arc)) {
    for (std::size_t i = 0; i < arc.points.size(); ++i)
      csv << arc.name << ',' << i << ',' << format_number(arc.points[i].x()) << ','
          << format_number(arc.points[i].y()) << '\n';
  }
  return csv.str();
}

AnalysisOutput analyze(const TrajectoryBundle& bundle, const AnalysisConfig& config) {
  validate(config);
  validate(bundle);
  if (bundle.n_stages < 2) throw InputError("analysis needs at least two stages");

  const Eigen::Index n = bundle.n_outputs;
  const Eigen::Index m = bundle.n_instances;
  const auto states = trajectory_states(bundle);
  const std::vector<std::string>* labels = bundle.token_labels ? &*bundle.token_labels : nullptr;
  const GainRanking householder_ranking =
      config.cohesion_ranking == "gain" ? GainRanking::negated : GainRanking::positive;

  AnalysisOutput output;
  json& report = output.report;
  report["tool"] = {{"name", "qlens"}, {"version", kVersion}};
  report["config"] = to_json(config);
  report["bundle"] = {{"n_outputs", n},
                      {"n_stages", bundle.n_stages},
                      {"n_instances", m},
                      {"stage_names", bundle.stage_names},
                      {"has_token_labels", bundle.token_labels.has_value()},
                      {"has_embeddings", bundle.embeddings.has_value()}};
  report["layers"] = json::array();

  std::vector<LayerFit> fits;
  for (Eigen::Index stage = 0; stage + 1 < bundle.n_stages; ++stage) {
    const auto layer_index = static_cast<std::size_t>(stage + 1);
    const std::string& name = bundle.stage_names[layer_index];
    const std::string tag = file_tag(layer_index, name);

    LayerFit fit;
    fit.deltas.resize(m, n);
    double max_error = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const State& in = states.at(i, stage);
      const State& out = states.at(i, stage + 1);
      auto op = fit_householder(in, out);
      const auto h = hamiltonian_of(op, config.alpha);
      const auto delta = delta_psi_spectral(h, in);
      const VectorXd direct = out.components - in.components;
      max_error = std::max(max_error, (delta.components - direct).cwiseAbs().maxCoeff());
      fit.deltas.row(i) = delta.components.transpose();
      fit.ops.push_back(std::move(op));
    }
    if (!(max_error <= kSpectralCheckTolerance))
      throw SelfCheckError("Hamiltonian state change disagrees with the direct difference in layer \"" +
                           name + "\" (max error " + format_number(max_error) + ")");

    const auto usable = usable_operators(fit.ops);
    std::vector<Eigen::Index> usable_instances;
    for (const auto& op : usable) usable_instances.push_back(op.instance);

    json layer;
    layer["index"] = layer_index;
    layer["name"] = name;
    layer["from_stage"] = bundle.stage_names[layer_index - 1];
    layer["to_stage"] = name;
    layer["operators"] = {{"count", m},
                          {"degenerate", m - static_cast<Eigen::Index>(usable.size())},
                          {"usable", usable.size()}};
    layer["hamiltonian"] = {{"alpha", config.alpha},
                            {"energy", std::numbers::pi / config.alpha},
                            {"branch", "principal"}};

    json dense_check;
    if (usable.empty()) {
      dense_check = skipped("no non-degenerate operator");
    } else if (n > config.dense_cap) {
      dense_check = skipped("n_outputs exceeds dense cap");
    } else {
      const auto& op = usable.front();
      const VectorXd mapped = materialize_unitary(op, config.dense_cap) *
                              states.at(op.instance, stage).components;
      const double error =
          (mapped - states.at(op.instance, stage + 1).components).cwiseAbs().maxCoeff();
      if (!(error <= kSpectralCheckTolerance))
        throw SelfCheckError("dense unitary does not reproduce the output state in layer \"" + name + "\"");
      dense_check = {{"status", "ok"}, {"instance", op.instance}, {"max_error", error}};
    }
    layer["self_check"] = {{"spectral_max_error", max_error},
                           {"tolerance", kSpectralCheckTolerance},
                           {"passed", true},
                           {"dense_reconstruction", dense_check}};

    // Cohesion of unitaries and Hamiltonians against a Dirichlet control.
    if (usable.size() < 2) {
      layer["cohesion"] = skipped("insufficient non-degenerate operators");
    } else {
      const auto controls = sample_control_operators(std::min(usable.size(), config.operator_cap), n,
                                                     task_seed(config, layer_index, kControlOperators));
      const auto unitary_test = two_sample_permutation_test(
          usable, controls, SimilarityKind::unitary, config.n_perm_similarity,
          task_seed(config, layer_index, kUnitaryTest), config.operator_cap);
      const auto hamiltonian_test = two_sample_permutation_test(
          usable, controls, SimilarityKind::hamiltonian, config.n_perm_similarity,
          task_seed(config, layer_index, kHamiltonianTest), config.operator_cap);
      layer["cohesion"] = {
          {"status", "ok"},
          {"mean_unitary_similarity", mean_pairwise_similarity(usable, SimilarityKind::unitary)},
          {"mean_hamiltonian_similarity", mean_pairwise_similarity(usable, SimilarityKind::hamiltonian)},
          {"control_count", controls.size()},
          {"control_mean_unitary_similarity", mean_pairwise_similarity(controls, SimilarityKind::unitary)},
          {"control_mean_hamiltonian_similarity",
           mean_pairwise_similarity(controls, SimilarityKind::hamiltonian)},
          {"unitary_test", test_json(unitary_test)},
          {"hamiltonian_test", test_json(hamiltonian_test)}};
    }

    // Mean state change against control changes.
    {
      const MatrixXd control = sample_control_deltas(static_cast<std::size_t>(m), n,
                                                     task_seed(config, layer_index, kControlDeltas));
      const auto summary = mean_delta_test(fit.deltas, control, config.n_perm_scalar,
                                           task_seed(config, layer_index, kDeltaTest), labels);
      json top = json::array();
      for (const auto& c : summary.top_components) {
        json entry = {{"unit", c.unit}, {"value", c.value}};
        if (c.label) entry["label"] = *c.label;
        top.push_back(entry);
      }
      layer["delta_psi"] = {
          {"mean_magnitude", summary.mean_magnitude},
          {"mean_delta", std::vector<double>(summary.mean_delta.begin(), summary.mean_delta.end())},
          {"magnitude_test", test_json(summary.magnitude_test)},
          {"top_components", top}};
    }

    // Clustering and projections of Householder normals and state changes.
    const MatrixXd normals = normals_as_rows(usable);
    MatrixXd usable_deltas(static_cast<Eigen::Index>(usable_instances.size()), n);
    for (std::size_t i = 0; i < usable_instances.size(); ++i)
      usable_deltas.row(static_cast<Eigen::Index>(i)) = fit.deltas.row(usable_instances[i]);

    auto householder_clusters =
        cluster_vectors(normals, bundle, config, householder_ranking,
                        task_seed(config, layer_index, kHouseholderElbow),
                        task_seed(config, layer_index, kHouseholderCohesion));
    auto delta_clusters = cluster_vectors(usable_deltas, bundle, config, GainRanking::positive,
                                          task_seed(config, layer_index, kDeltaElbow),
                                          task_seed(config, layer_index, kDeltaCohesion));
    if (!householder_clusters.inertia_csv.empty())
      output.sidecars.push_back({"inertia_householder_" + tag + ".csv", householder_clusters.inertia_csv});
    if (!delta_clusters.inertia_csv.empty())
      output.sidecars.push_back({"inertia_delta_psi_" + tag + ".csv", delta_clusters.inertia_csv});
    layer["householder_clusters"] = householder_clusters.summary;
    layer["delta_psi_clusters"] = delta_clusters.summary;

    json householder_projection;
    json delta_projection;
    auto csv = projection_csv(normals, usable_instances, householder_clusters.labels,
                              householder_projection);
    if (!csv.empty()) output.sidecars.push_back({"projection_householder_" + tag + ".csv", csv});
    csv = projection_csv(usable_deltas, usable_instances, delta_clusters.labels, delta_projection);
    if (!csv.empty()) output.sidecars.push_back({"projection_delta_psi_" + tag + ".csv", csv});
    layer["projection"] = {{"householder", householder_projection}, {"delta_psi", delta_projection}};

    if (n == 2) {
      Eigen::Index inside = 0;
      std::ostringstream raw;
      raw << "instance,delta_1,delta_2,householder_1,householder_2,degenerate\n";
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Vector2d d = fit.deltas.row(i).transpose();
        if (geometry::locus_contains(d)) ++inside;
        const auto& op = fit.ops[static_cast<std::size_t>(i)];
        raw << i << ',' << format_number(d.x()) << ',' << format_number(d.y()) << ','
            << format_number(op.normal[0]) << ',' << format_number(op.normal[1]) << ','
            << (op.degenerate ? 1 : 0) << '\n';
      }
      output.sidecars.push_back({"points_" + tag + ".csv", raw.str()});
      layer["locus"] = {{"applicable", true},
                        {"n_total", m},
                        {"n_inside", inside},
                        {"fraction_inside", static_cast<double>(inside) / static_cast<double>(m)}};
    } else {
      layer["locus"] = {{"applicable", false}};
    }

    report["layers"].push_back(layer);
    fits.push_back(std::move(fit));
  }

  // Dependence between consecutive layers' Householder normals.
  report["distance_correlation"] = json::array();
  for (std::size_t l = 0; l + 1 < fits.size(); ++l) {
    json entry = {{"from_layer", bundle.stage_names[l + 1]}, {"to_layer", bundle.stage_names[l + 2]}};
    std::vector<Eigen::Index> paired;
    for (Eigen::Index i = 0; i < m; ++i)
      if (!fits[l].ops[static_cast<std::size_t>(i)].degenerate &&
          !fits[l + 1].ops[static_cast<std::size_t>(i)].degenerate)
        paired.push_back(i);
    entry["n_pairs"] = paired.size();
    if (paired.size() < 2) {
      entry.update(skipped("insufficient non-degenerate operator pairs"));
    } else {
      if (paired.size() > config.operator_cap) {
        Rng rng(task_seed(config, l + 1, kDcorSubsample));
        std::shuffle(paired.begin(), paired.end(), rng);
        paired.resize(config.operator_cap);
        std::sort(paired.begin(), paired.end());
      }
      MatrixXd x(static_cast<Eigen::Index>(paired.size()), n);
      MatrixXd y(static_cast<Eigen::Index>(paired.size()), n);
      for (std::size_t i = 0; i < paired.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = fits[l].ops[static_cast<std::size_t>(paired[i])].normal.transpose();
        y.row(static_cast<Eigen::Index>(i)) = fits[l + 1].ops[static_cast<std::size_t>(paired[i])].normal.transpose();
      }
      const auto test = dcor_independence_test(x, y, config.n_perm_scalar,
                                               task_seed(config, l + 1, kDcorTest));
      entry["status"] = "ok";
      entry["n_used"] = paired.size();
      entry["dcor"] = test.observed;
      entry["test"] = test_json(test);
    }
    report["distance_correlation"].push_back(entry);
  }

  if (n == 2) output.sidecars.push_back({"locus_arcs.csv", locus_csv(256)});

  check_finite(report, "");
  return output;
}

void write_output(const AnalysisOutput& output, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "report.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report.json in " + dir.string());
    out << output.report.dump(2) << '\n';
  }
  for (const auto& file : output.sidecars) {
    std::ofstream out(dir / file.name, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.name);
    out << file.content;
  }
}

}  // namespace qlens
