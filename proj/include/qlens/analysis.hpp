#ifndef QLENS_ANALYSIS_HPP
#define QLENS_ANALYSIS_HPP

#include "qlens/bundle.hpp"
#include "qlens/clustering.hpp"
#include "qlens/stats.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace qlens {

/// Every knob of the analysis pipeline. Echoed into the report.
struct AnalysisConfig {
  std::uint64_t seed = 0;
  double alpha = 1.0;
  std::int64_t n_perm_similarity = kDefaultSimilarityPermutations;
  std::int64_t n_perm_scalar = kDefaultScalarPermutations;
  std::vector<Eigen::Index> k_grid = default_k_grid();
  Eigen::Index top_m = kDefaultTopUnits;
  Eigen::Index dense_cap = kDefaultDenseCap;
  std::size_t operator_cap = kDefaultOperatorCap;
  int max_iter = kDefaultMaxIter;
  // "gain" ranks Householder cluster units by -v_k, "signed" by +v_k.
  std::string cohesion_ranking = "gain";
};

void validate(const AnalysisConfig& config);

nlohmann::json to_json(const AnalysisConfig& config);

/// Applies the keys present in a JSON object on top of config.
void apply_json(AnalysisConfig& config, const nlohmann::json& overrides);

/// Parses "start:stop:step" (inclusive stop) or a comma list "3,5,8".
std::vector<Eigen::Index> parse_k_grid(const std::string& text);

struct SidecarFile {
  std::string name;
  std::string content;
};

struct AnalysisOutput {
  nlohmann::json report;
  std::vector<SidecarFile> sidecars;
};

inline constexpr double kSpectralCheckTolerance = 1e-10;

/// Runs the full pipeline over consecutive stage pairs: operator fits,
/// Hamiltonians, state changes (checked against the direct difference),
/// cohesion tests, clustering, distance correlation, bias tests, projections
/// and, for two output units, locus membership.
///
/// Throws SelfCheckError if the Hamiltonian route disagrees with the direct
/// difference or the report would contain a non-finite number.
AnalysisOutput analyze(const TrajectoryBundle& bundle, const AnalysisConfig& config);

/// Writes report.json and the CSV sidecars into dir.
void write_output(const AnalysisOutput& output, const std::filesystem::path& dir);

/// Formats a double with enough digits to round-trip.
std::string format_number(double value);

/// Locus arcs as CSV: arc,index,x,y.
std::string locus_csv(int samples_per_arc);

}  // namespace qlens

#endif  // QLENS_ANALYSIS_HPP
