#ifndef QLENS_CLUSTERING_HPP
#define QLENS_CLUSTERING_HPP

#include "qlens/core.hpp"
#include "qlens/stats.hpp"

#include <cstdint>
#include <vector>

namespace qlens {

struct ClusterModel {
  Eigen::Index k = 0;
  MatrixXd centroids;  // k x N
  std::vector<Eigen::Index> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step
  int iterations = 0;
  std::uint64_t seed = 0;

  std::vector<Eigen::Index> sizes() const;
};

inline constexpr int kDefaultMaxIter = 300;

/// k-means with k-means++ seeding and Lloyd iterations. Points are rows.
/// Empty clusters are re-seeded with the point farthest from its centroid.
ClusterModel kmeans(const Eigen::Ref<const MatrixXd>& points, Eigen::Index k,
                    std::uint64_t seed, int max_iter = kDefaultMaxIter);

/// Sum of squared distances from each point to its assigned centroid.
double inertia_of(const Eigen::Ref<const MatrixXd>& points, const MatrixXd& centroids,
                  const std::vector<Eigen::Index>& assignments);

struct ElbowResult {
  Eigen::Index k = 0;
  std::vector<Eigen::Index> k_values;
  std::vector<double> inertias;
  std::vector<ClusterModel> models;

  const ClusterModel& selected() const;
};

/// Multiples of 5 from 5 to 50.
std::vector<Eigen::Index> default_k_grid();

/// Fits k-means for every grid value and picks the knee: the interior grid
/// point farthest from the chord joining the curve's endpoints, with both
/// axes scaled to [0, 1]. Ties go to the first maximum.
ElbowResult elbow_select_k(const Eigen::Ref<const MatrixXd>& points,
                           const std::vector<Eigen::Index>& k_grid, std::uint64_t seed,
                           int max_iter = kDefaultMaxIter);

/// Knee index of an arbitrary curve (same rule as elbow_select_k).
std::size_t knee_index(const std::vector<double>& x, const std::vector<double>& y);

/// How a cluster's mean vector ranks output units by probability gain.
enum class GainRanking {
  negated,  // Householder normals: gains show up as negative components
  positive, // state deltas: gains are positive components
};

struct ClusterCohesion {
  Eigen::Index cluster = 0;
  std::vector<Eigen::Index> top_units;
  double cohesion = 0.0;
};

struct CohesionResult {
  double mean_cohesion = 0.0;
  std::vector<ClusterCohesion> per_cluster;
  Eigen::Index n_skipped = 0;  // clusters with fewer than two top units
  std::optional<PermutationTestResult> test;
};

inline constexpr Eigen::Index kDefaultTopUnits = 10;

/// For each cluster: rank units of the member mean by gain, take the top_m,
/// and average the pairwise cosine similarity of their embedding rows.
/// Throws MissingEmbeddingsError when embeddings is empty.
CohesionResult cluster_cohesion(const std::vector<Eigen::Index>& assignments, Eigen::Index k,
                                const Eigen::Ref<const MatrixXd>& vectors,
                                const Eigen::Ref<const MatrixXd>& embeddings,
                                GainRanking ranking, Eigen::Index top_m = kDefaultTopUnits);

inline CohesionResult cluster_cohesion(const ClusterModel& model,
                                       const Eigen::Ref<const MatrixXd>& vectors,
                                       const Eigen::Ref<const MatrixXd>& embeddings,
                                       GainRanking ranking,
                                       Eigen::Index top_m = kDefaultTopUnits) {
  return cluster_cohesion(model.assignments, model.k, vectors, embeddings, ranking, top_m);
}

/// Compares mean cohesion against label shuffles that keep cluster sizes.
CohesionResult cohesion_permutation_test(const ClusterModel& model,
                                         const Eigen::Ref<const MatrixXd>& vectors,
                                         const Eigen::Ref<const MatrixXd>& embeddings,
                                         GainRanking ranking, std::int64_t n_permutations,
                                         std::uint64_t seed,
                                         Eigen::Index top_m = kDefaultTopUnits);

struct Projection {
  MatrixXd coordinates;  // M x out_dims
  VectorXd explained_variance;  // fraction per axis
  MatrixXd axes;  // N x out_dims principal directions
};

/// Mean-centred PCA projection. Axes are ordered by decreasing variance and
/// each axis is signed so its largest-magnitude loading is positive.
Projection pca_project(const Eigen::Ref<const MatrixXd>& points, Eigen::Index out_dims = 2);

}  // namespace qlens

#endif  // QLENS_CLUSTERING_HPP
