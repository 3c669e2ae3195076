#ifndef QLENS_BUNDLE_HPP
#define QLENS_BUNDLE_HPP

#include "qlens/core.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qlens {

/// Per-instance probability distributions observed at each probed stage of a
/// model, plus optional output-unit metadata.
///
/// probs[s] is an M x N row-major matrix: row m is instance m's distribution
/// at stage s. Rows are nonnegative and sum to 1 within 1e-6.
struct TrajectoryBundle {
  Eigen::Index n_outputs = 0;
  Eigen::Index n_stages = 0;
  Eigen::Index n_instances = 0;
  std::vector<RowMatrixXd> probs;
  std::vector<std::string> stage_names;
  std::optional<std::vector<std::string>> token_labels;
  std::optional<RowMatrixXd> embeddings;  // N x D

  auto row(Eigen::Index instance, Eigen::Index stage) const {
    return probs[static_cast<std::size_t>(stage)].row(instance);
  }
};

/// Throws InputError if any structural or probability invariant fails.
void validate(const TrajectoryBundle& bundle);

// Load-time tolerances.
inline constexpr double kRowSumGate = 1e-3;       // beyond this the export is corrupt
inline constexpr double kRowSumTolerance = 1e-6;  // within this the row is kept verbatim
inline constexpr double kNegativeFloor = -1e-9;   // smaller values are rejected

/// Reads a bundle directory (manifest.json, stage_<i>.f32, embeddings.f32).
/// Rows with |sum - 1| in (1e-6, 1e-3] are rescaled; tiny negatives in
/// [-1e-9, 0) are clamped to zero.
TrajectoryBundle read_bundle(const std::filesystem::path& dir);

/// Writes the bundle directory, creating it if needed. Payloads are stored as
/// little-endian binary32.
void write_bundle(const TrajectoryBundle& bundle, const std::filesystem::path& dir);

enum class DriftMode { random_walk, biased_arc, clustered };

std::string to_string(DriftMode mode);
DriftMode parse_drift_mode(const std::string& text);

struct SynthConfig {
  Eigen::Index n_outputs = 2;
  Eigen::Index n_stages = 3;
  Eigen::Index n_instances = 100;
  double concentration = 1.0;
  DriftMode drift_mode = DriftMode::random_walk;
  double drift_strength = 0.3;
  std::uint64_t seed = 0;
  // Optional extras, zero/false means absent.
  Eigen::Index embedding_dim = 0;
  bool token_labels = false;
};

void validate(const SynthConfig& config);

/// Synthesizes a bundle. Stage 0 rows are Dirichlet(concentration) draws;
/// each later stage mixes the previous one toward a drift target with
/// weight drift_strength. Rows are rounded to binary32 so the result
/// round-trips through write_bundle/read_bundle exactly.
TrajectoryBundle gen_synthetic(const SynthConfig& config);

/// {"embedding", "attention", "mlp"} for three stages, "stage_<i>" otherwise.
std::vector<std::string> default_stage_names(Eigen::Index n_stages);

}  // namespace qlens

#endif  // QLENS_BUNDLE_HPP
