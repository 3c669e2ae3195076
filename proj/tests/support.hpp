// Test-only generators and independent oracles. Nothing here calls into the
// code paths it is used to check.
#ifndef QLENS_TESTS_SUPPORT_HPP
#define QLENS_TESTS_SUPPORT_HPP

#include "qlens/core.hpp"
#include "qlens/operators.hpp"
#include "qlens/random.hpp"
#include "qlens/statevec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

namespace qlens::testing {

inline State random_state(Rng& rng, Eigen::Index n, double concentration = 1.0) {
  return state_from_probs(sample_dirichlet(rng, n, concentration));
}

inline VectorXd random_unit(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v.normalized();
}

inline Householder operator_from_normal(const VectorXd& normal) {
  Householder op;
  op.normal = normal;
  return op;
}

// Textbook distance correlation with explicit loops: a_ij = d_ij - row_i -
// col_j + grand, dCov^2 = (1/n^2) sum a_ij b_ij.
inline double naive_dcor(const MatrixXd& x, const MatrixXd& y) {
  const Eigen::Index n = x.rows();
  auto centered = [n](const MatrixXd& s) {
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < s.cols(); ++c) acc += (s(i, c) - s(j, c)) * (s(i, c) - s(j, c));
        d[i][j] = std::sqrt(acc);
      }
    std::vector<double> row(n, 0.0), col(n, 0.0);
    double grand = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        row[i] += d[i][j] / n;
        col[j] += d[i][j] / n;
        grand += d[i][j] / (static_cast<double>(n) * n);
      }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) d[i][j] = d[i][j] - row[i] - col[j] + grand;
    return d;
  };
  const auto a = centered(x);
  const auto b = centered(y);
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      xy += a[i][j] * b[i][j];
      xx += a[i][j] * a[i][j];
      yy += b[i][j] * b[i][j];
    }
  xy /= static_cast<double>(n) * n;
  xx /= static_cast<double>(n) * n;
  yy /= static_cast<double>(n) * n;
  if (xx <= 0.0 || yy <= 0.0) return 0.0;
  return std::sqrt(std::max(0.0, xy) / std::sqrt(xx * yy));
}

struct Blobs {
  MatrixXd points;
  std::vector<Eigen::Index> labels;
};

// Isotropic Gaussian blobs around well-separated centres.
inline Blobs make_blobs(Eigen::Index per_blob, const std::vector<VectorXd>& centres, double spread,
                        std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, spread);
  Blobs out;
  const auto dims = centres.front().size();
  out.points.resize(per_blob * static_cast<Eigen::Index>(centres.size()), dims);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < centres.size(); ++c)
    for (Eigen::Index i = 0; i < per_blob; ++i, ++row) {
      for (Eigen::Index d = 0; d < dims; ++d) out.points(row, d) = centres[c][d] + normal(rng);
      out.labels.push_back(static_cast<Eigen::Index>(c));
    }
  return out;
}

inline std::vector<VectorXd> three_centres() {
  return {(VectorXd(2) << 0.0, 0.0).finished(), (VectorXd(2) << 10.0, 0.0).finished(),
          (VectorXd(2) << 0.0, 10.0).finished()};
}

// Best label agreement over all relabelings (k small, brute force).
inline double label_agreement(const std::vector<Eigen::Index>& truth,
                              const std::vector<Eigen::Index>& predicted, Eigen::Index k) {
  std::vector<Eigen::Index> mapping(static_cast<std::size_t>(k));
  std::iota(mapping.begin(), mapping.end(), Eigen::Index{0});
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (mapping[static_cast<std::size_t>(predicted[i])] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(mapping.begin(), mapping.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("qlens_test_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the CLI binary; returns its exit code.
inline int run_cli(const std::string& args) {
  const std::string command = std::string(QLENS_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace qlens::testing

#endif  // QLENS_TESTS_SUPPORT_HPP
