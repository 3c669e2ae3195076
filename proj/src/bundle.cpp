#include "qlens/bundle.hpp"

#include "qlens/random.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace qlens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string stage_file(Eigen::Index stage) {
  return "stage_" + std::to_string(stage) + ".f32";
}

std::uint32_t to_little_endian(std::uint32_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) |
           (bits >> 24);
  }
  return bits;
}

void write_f32(const fs::path& path, const RowMatrixXd& values) {
  std::vector<std::uint32_t> words(static_cast<std::size_t>(values.size()));
  const double* src = values.data();
  for (std::size_t i = 0; i < words.size(); ++i)
    words[i] = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(src[i])));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

RowMatrixXd read_f32(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::error_code ec;
  const auto bytes = fs::file_size(path, ec);
  if (ec) throw InputError("missing payload file " + path.filename().string());
  const auto expected = static_cast<std::uintmax_t>(rows * cols) * sizeof(float);
  if (bytes != expected)
    throw InputError("shape mismatch in " + path.filename().string() + ": expected " +
                     std::to_string(expected) + " bytes, found " + std::to_string(bytes));
  std::vector<std::uint32_t> words(static_cast<std::size_t>(rows * cols));
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(expected));
  if (!in) throw InputError("failed reading " + path.filename().string());
  RowMatrixXd out(rows, cols);
  double* dst = out.data();
  for (std::size_t i = 0; i < words.size(); ++i)
    dst[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(words[i])));
  return out;
}

template <typename T>
T manifest_field(const json& manifest, const char* key) {
  if (!manifest.contains(key)) throw InputError(std::string("manifest missing \"") + key + "\"");
  try {
    return manifest.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("manifest field \"") + key + "\" has the wrong type");
  }
}

// Brings a freshly loaded row onto the simplex or rejects it.
void normalize_row(RowMatrixXd& p, Eigen::Index stage, Eigen::Index instance) {
  auto row = p.row(instance);
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    const double value = row[k];
    if (!std::isfinite(value))
      throw InputError("non-finite probability at stage " + std::to_string(stage) +
                       ", instance " + std::to_string(instance));
    if (value < kNegativeFloor)
      throw InputError("negative probability at stage " + std::to_string(stage) +
                       ", instance " + std::to_string(instance));
    if (value < 0.0) row[k] = 0.0;
  }
  const double total = row.sum();
  const double deviation = std::abs(total - 1.0);
  if (deviation > kRowSumGate)
    throw InputError("row sum out of tolerance at stage " + std::to_string(stage) +
                     ", instance " + std::to_string(instance) + " (sum " +
                     std::to_string(total) + ")");
  if (deviation > kRowSumTolerance) row /= total;
}

}  // namespace

std::vector<std::string> default_stage_names(Eigen::Index n_stages) {
  if (n_stages == 3) return {"embedding", "attention", "mlp"};
  std::vector<std::string> names;
  for (Eigen::Index s = 0; s < n_stages; ++s) names.push_back("stage_" + std::to_string(s));
  return names;
}

void validate(const TrajectoryBundle& b) {
  if (b.n_outputs < 1 || b.n_stages < 1 || b.n_instances < 1)
    throw InputError("bundle dimensions must be positive");
  if (static_cast<Eigen::Index>(b.probs.size()) != b.n_stages)
    throw InputError("bundle has " + std::to_string(b.probs.size()) + " stage matrices, expected " +
                     std::to_string(b.n_stages));
  if (static_cast<Eigen::Index>(b.stage_names.size()) != b.n_stages)
    throw InputError("stage_names length does not match n_stages");
  if (std::set<std::string>(b.stage_names.begin(), b.stage_names.end()).size() !=
      b.stage_names.size())
    throw InputError("stage_names must be unique");
  if (b.token_labels && static_cast<Eigen::Index>(b.token_labels->size()) != b.n_outputs)
    throw InputError("token_labels length does not match n_outputs");
  if (b.embeddings && (b.embeddings->rows() != b.n_outputs || b.embeddings->cols() < 1))
    throw InputError("embeddings must have n_outputs rows and at least one column");
  for (Eigen::Index s = 0; s < b.n_stages; ++s) {
    const auto& p = b.probs[static_cast<std::size_t>(s)];
    if (p.rows() != b.n_instances || p.cols() != b.n_outputs)
      throw InputError("stage " + std::to_string(s) + " matrix has the wrong shape");
    if (!p.allFinite()) throw InputError("non-finite probability in stage " + std::to_string(s));
    if ((p.array() < 0.0).any())
      throw InputError("negative probability in stage " + std::to_string(s));
    for (Eigen::Index m = 0; m < b.n_instances; ++m) {
      if (std::abs(p.row(m).sum() - 1.0) > kRowSumTolerance)
        throw InputError("row sum out of tolerance at stage " + std::to_string(s) +
                         ", instance " + std::to_string(m));
    }
  }
}

TrajectoryBundle read_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw InputError("missing manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw InputError(std::string("garbled manifest: ") + e.what());
  }
  if (!manifest.is_object()) throw InputError("garbled manifest: not a JSON object");

  const auto version = manifest_field<int>(manifest, "format_version");
  if (version != kFormatVersion)
    throw InputError("unsupported format_version " + std::to_string(version));

  TrajectoryBundle b;
  b.n_outputs = manifest_field<Eigen::Index>(manifest, "n_outputs");
  b.n_stages = manifest_field<Eigen::Index>(manifest, "n_stages");
  b.n_instances = manifest_field<Eigen::Index>(manifest, "n_instances");
  if (b.n_outputs < 1 || b.n_stages < 1 || b.n_instances < 1)
    throw InputError("manifest dimensions must be positive");
  b.stage_names = manifest_field<std::vector<std::string>>(manifest, "stage_names");
  if (manifest.contains("token_labels"))
    b.token_labels = manifest_field<std::vector<std::string>>(manifest, "token_labels");

  for (Eigen::Index s = 0; s < b.n_stages; ++s) {
    RowMatrixXd p = read_f32(dir / stage_file(s), b.n_instances, b.n_outputs);
    for (Eigen::Index m = 0; m < b.n_instances; ++m) normalize_row(p, s, m);
    b.probs.push_back(std::move(p));
  }

  if (manifest_field<bool>(manifest, "has_embeddings")) {
    const auto dim = manifest_field<Eigen::Index>(manifest, "embedding_dim");
    if (dim < 1) throw InputError("embedding_dim must be positive");
    b.embeddings = read_f32(dir / "embeddings.f32", b.n_outputs, dim);
    if (!b.embeddings->allFinite()) throw InputError("non-finite embedding value");
  }

  validate(b);
  return b;
}

void write_bundle(const TrajectoryBundle& b, const fs::path& dir) {
  validate(b);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["n_outputs"] = b.n_outputs;
  manifest["n_stages"] = b.n_stages;
  manifest["n_instances"] = b.n_instances;
  manifest["stage_names"] = b.stage_names;
  if (b.token_labels) manifest["token_labels"] = *b.token_labels;
  manifest["has_embeddings"] = b.embeddings.has_value();
  if (b.embeddings) manifest["embedding_dim"] = b.embeddings->cols();

  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }
  for (Eigen::Index s = 0; s < b.n_stages; ++s)
    write_f32(dir / stage_file(s), b.probs[static_cast<std::size_t>(s)]);
  if (b.embeddings) write_f32(dir / "embeddings.f32", *b.embeddings);
}

std::string to_string(DriftMode mode) {
  switch (mode) {
    case DriftMode::random_walk: return "random_walk";
    case DriftMode::biased_arc: return "biased_arc";
    case DriftMode::clustered: return "clustered";
  }
  return "unknown";
}

DriftMode parse_drift_mode(const std::string& text) {
  if (text == "random_walk") return DriftMode::random_walk;
  if (text == "biased_arc") return DriftMode::biased_arc;
  if (text == "clustered") return DriftMode::clustered;
  throw std::invalid_argument("unknown drift mode \"" + text +
                              "\" (expected random_walk, biased_arc or clustered)");
}

void validate(const SynthConfig& c) {
  if (c.n_outputs < 2) throw std::invalid_argument("n_outputs must be at least 2");
  if (c.n_stages < 1) throw std::invalid_argument("n_stages must be positive");
  if (c.n_instances < 1) throw std::invalid_argument("n_instances must be positive");
  if (!(c.concentration > 0.0) || !std::isfinite(c.concentration))
    throw std::invalid_argument("concentration must be positive");
  if (!(c.drift_strength >= 0.0 && c.drift_strength <= 1.0))
    throw std::invalid_argument("drift_strength must lie in [0, 1]");
  if (c.embedding_dim < 0) throw std::invalid_argument("embedding_dim must be nonnegative");
}

namespace {

constexpr int kClusterTargets = 3;

// Rounds a distribution to binary32 and keeps it exactly representable.
void quantize_row(RowMatrixXd& p, Eigen::Index m) {
  auto row = p.row(m);
  for (Eigen::Index k = 0; k < row.size(); ++k)
    row[k] = static_cast<double>(static_cast<float>(row[k]));
}

}  // namespace

TrajectoryBundle gen_synthetic(const SynthConfig& c) {
  validate(c);
  TrajectoryBundle b;
  b.n_outputs = c.n_outputs;
  b.n_stages = c.n_stages;
  b.n_instances = c.n_instances;
  b.stage_names = default_stage_names(c.n_stages);
  for (Eigen::Index s = 0; s < c.n_stages; ++s)
    b.probs.emplace_back(c.n_instances, c.n_outputs);

  // Stream 0: targets and metadata. Stream 1 + m: instance m.
  Rng shared = make_rng(c.seed, 0);
  std::vector<VectorXd> targets;
  const int n_targets = c.drift_mode == DriftMode::clustered ? kClusterTargets
                        : c.drift_mode == DriftMode::biased_arc ? 1
                                                                 : 0;
  for (int t = 0; t < n_targets; ++t)
    targets.push_back(sample_dirichlet(shared, c.n_outputs, c.concentration));

  for (Eigen::Index m = 0; m < c.n_instances; ++m) {
    Rng rng = make_rng(c.seed, static_cast<std::uint64_t>(m) + 1);
    VectorXd current = sample_dirichlet(rng, c.n_outputs, c.concentration);
    const VectorXd* target = nullptr;
    if (c.drift_mode == DriftMode::biased_arc) target = &targets[0];
    if (c.drift_mode == DriftMode::clustered)
      target = &targets[static_cast<std::size_t>(m % kClusterTargets)];

    for (Eigen::Index s = 0; s < c.n_stages; ++s) {
      if (s > 0) {
        const VectorXd pull = target ? *target
                                     : sample_dirichlet(rng, c.n_outputs, c.concentration);
        current = (1.0 - c.drift_strength) * current + c.drift_strength * pull;
      }
      auto& stage = b.probs[static_cast<std::size_t>(s)];
      stage.row(m) = current.transpose();
      quantize_row(stage, m);
    }
  }

  if (c.embedding_dim > 0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrixXd emb(c.n_outputs, c.embedding_dim);
    for (Eigen::Index i = 0; i < emb.size(); ++i)
      emb.data()[i] = static_cast<double>(static_cast<float>(normal(shared)));
    b.embeddings = std::move(emb);
  }
  if (c.token_labels) {
    std::vector<std::string> labels;
    for (Eigen::Index k = 0; k < c.n_outputs; ++k) labels.push_back("unit_" + std::to_string(k));
    b.token_labels = std::move(labels);
  }
  validate(b);
  return b;
}

}  // namespace qlens
