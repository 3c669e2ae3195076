#include "qlens/clustering.hpp"

#include "qlens/parallel.hpp"
#include "qlens/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qlens {

std::vector<Eigen::Index> ClusterModel::sizes() const {
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (auto label : assignments) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

double inertia_of(const Eigen::Ref<const MatrixXd>& points, const MatrixXd& centroids,
                  const std::vector<Eigen::Index>& assignments) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    total += (points.row(i) - centroids.row(assignments[static_cast<std::size_t>(i)])).squaredNorm();
  return total;
}

namespace {

MatrixXd seed_centroids(const Eigen::Ref<const MatrixXd>& points, Eigen::Index k, Rng& rng) {
  const Eigen::Index m = points.rows();
  MatrixXd centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  centroids.row(0) = points.row(pick(rng));
  VectorXd nearest = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = nearest.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double running = 0.0;
      chosen = m - 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        running += nearest[i];
        if (running > target && nearest[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(c) = points.row(chosen);
    nearest = nearest.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

std::vector<Eigen::Index> assign(const Eigen::Ref<const MatrixXd>& points, const MatrixXd& centroids) {
  std::vector<Eigen::Index> labels(static_cast<std::size_t>(points.rows()));
  parallel_for(labels.size(), [&](std::size_t i) {
    const auto idx = static_cast<Eigen::Index>(i);
    Eigen::Index best = 0;
    double best_distance = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(idx) - centroids.row(c)).squaredNorm();
      if (d < best_distance) {
        best_distance = d;
        best = c;
      }
    }
    labels[i] = best;
  });
  return labels;
}

// Recomputes centroids as member means. Empty clusters take the point
// farthest from its current centroid among clusters with spare members.
MatrixXd update_centroids(const Eigen::Ref<const MatrixXd>& points, const MatrixXd& previous,
                          std::vector<Eigen::Index>& labels) {
  const Eigen::Index k = previous.rows();
  MatrixXd sums = MatrixXd::Zero(k, points.cols());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto c = labels[static_cast<std::size_t>(i)];
    sums.row(c) += points.row(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  MatrixXd centroids = previous;
  for (Eigen::Index c = 0; c < k; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0)
      centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);

  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    Eigen::Index farthest = -1;
    double farthest_distance = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const auto owner = labels[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(owner)] < 2) continue;
      const double d = (points.row(i) - centroids.row(owner)).squaredNorm();
      if (d > farthest_distance) {
        farthest_distance = d;
        farthest = i;
      }
    }
    if (farthest < 0) continue;
    --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(farthest)])];
    labels[static_cast<std::size_t>(farthest)] = c;
    counts[static_cast<std::size_t>(c)] = 1;
    centroids.row(c) = points.row(farthest);
  }
  return centroids;
}

}  // namespace

ClusterModel kmeans(const Eigen::Ref<const MatrixXd>& points, Eigen::Index k, std::uint64_t seed,
                    int max_iter) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (points.rows() < k)
    throw std::invalid_argument("k-means needs at least k points (M=" +
                                std::to_string(points.rows()) + ", k=" + std::to_string(k) + ")");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be positive");

  Rng rng = make_rng(seed, 0);
  ClusterModel model;
  model.k = k;
  model.seed = seed;
  model.centroids = seed_centroids(points, k, rng);
  model.assignments = assign(points, model.centroids);
  model.inertia = inertia_of(points, model.centroids, model.assignments);
  model.inertia_history.push_back(model.inertia);

  for (int iter = 1; iter <= max_iter; ++iter) {
    auto labels = model.assignments;
    MatrixXd centroids = update_centroids(points, model.centroids, labels);
    auto next = assign(points, centroids);
    model.centroids = std::move(centroids);
    model.iterations = iter;
    model.inertia = inertia_of(points, model.centroids, next);
    model.inertia_history.push_back(model.inertia);
    const bool converged = next == labels;
    model.assignments = std::move(next);
    if (converged) break;
  }
  return model;
}

const ClusterModel& ElbowResult::selected() const {
  const auto it = std::find(k_values.begin(), k_values.end(), k);
  return models[static_cast<std::size_t>(it - k_values.begin())];
}

std::vector<Eigen::Index> default_k_grid() {
  std::vector<Eigen::Index> grid;
  for (Eigen::Index k = 5; k <= 50; k += 5) grid.push_back(k);
  return grid;
}

std::size_t knee_index(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("knee detection needs at least 3 points");
  const double x_span = x.back() - x.front();
  const auto [y_min, y_max] = std::minmax_element(y.begin(), y.end());
  const double y_span = *y_max - *y_min;
  const auto nx = [&](std::size_t i) { return x_span > 0 ? (x[i] - x.front()) / x_span : 0.0; };
  const auto ny = [&](std::size_t i) { return y_span > 0 ? (y[i] - *y_min) / y_span : 0.0; };

  const double dx = nx(x.size() - 1) - nx(0);
  const double dy = ny(y.size() - 1) - ny(0);
  const double chord = std::hypot(dx, dy);
  std::size_t best = 1;
  double best_distance = -1.0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double cross = dx * (ny(i) - ny(0)) - dy * (nx(i) - nx(0));
    const double distance = chord > 0 ? std::abs(cross) / chord : 0.0;
    if (distance > best_distance + 1e-12) {
      best_distance = distance;
      best = i;
    }
  }
  return best;
}

ElbowResult elbow_select_k(const Eigen::Ref<const MatrixXd>& points,
                           const std::vector<Eigen::Index>& k_grid, std::uint64_t seed,
                           int max_iter) {
  if (k_grid.size() < 3) throw std::invalid_argument("k grid needs at least 3 values");
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    if (k_grid[i] < 1) throw std::invalid_argument("k grid values must be positive");
    if (i > 0 && k_grid[i] <= k_grid[i - 1])
      throw std::invalid_argument("k grid must be strictly ascending");
  }
  if (k_grid.back() > points.rows())
    throw std::invalid_argument("k grid exceeds the number of points");

  ElbowResult result;
  result.k_values = k_grid;
  std::vector<double> ks;
  for (auto k : k_grid) {
    result.models.push_back(kmeans(points, k, derive_seed(seed, static_cast<std::uint64_t>(k)), max_iter));
    result.inertias.push_back(result.models.back().inertia);
    ks.push_back(static_cast<double>(k));
  }
  result.k = k_grid[knee_index(ks, result.inertias)];
  return result;
}

CohesionResult cluster_cohesion(const std::vector<Eigen::Index>& assignments, Eigen::Index k,
                                const Eigen::Ref<const MatrixXd>& vectors,
                                const Eigen::Ref<const MatrixXd>& embeddings, GainRanking ranking,
                                Eigen::Index top_m) {
  if (embeddings.size() == 0)
    throw MissingEmbeddingsError("cohesion analysis unavailable: bundle has no embeddings");
  if (embeddings.rows() != vectors.cols())
    throw std::invalid_argument("embedding rows must match the vector dimension");
  if (top_m < 2) throw std::invalid_argument("top_m must be at least 2");
  if (static_cast<Eigen::Index>(assignments.size()) != vectors.rows())
    throw std::invalid_argument("one assignment per vector required");

  MatrixXd unit_embeddings = embeddings;
  for (Eigen::Index r = 0; r < unit_embeddings.rows(); ++r) {
    const double norm = unit_embeddings.row(r).norm();
    if (norm > 0.0) unit_embeddings.row(r) /= norm;
  }

  MatrixXd sums = MatrixXd::Zero(k, vectors.cols());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const auto c = assignments[static_cast<std::size_t>(i)];
    if (c < 0 || c >= k) throw std::invalid_argument("cluster label out of range");
    sums.row(c) += vectors.row(i);
    ++counts[static_cast<std::size_t>(c)];
  }

  CohesionResult result;
  const Eigen::Index take = std::min(top_m, vectors.cols());
  double total = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0 || take < 2) {
      ++result.n_skipped;
      continue;
    }
    const VectorXd gain = (ranking == GainRanking::negated ? -1.0 : 1.0) * sums.row(c).transpose() /
                          static_cast<double>(counts[static_cast<std::size_t>(c)]);
    std::vector<Eigen::Index> units(static_cast<std::size_t>(gain.size()));
    std::iota(units.begin(), units.end(), Eigen::Index{0});
    std::partial_sort(units.begin(), units.begin() + take, units.end(),
                      [&](Eigen::Index lhs, Eigen::Index rhs) {
                        return gain[lhs] != gain[rhs] ? gain[lhs] > gain[rhs] : lhs < rhs;
                      });
    units.resize(static_cast<std::size_t>(take));

    double pair_sum = 0.0;
    for (std::size_t a = 0; a < units.size(); ++a)
      for (std::size_t b = a + 1; b < units.size(); ++b)
        pair_sum += unit_embeddings.row(units[a]).dot(unit_embeddings.row(units[b]));
    const double pairs = 0.5 * static_cast<double>(take * (take - 1));
    ClusterCohesion cluster{c, std::move(units), pair_sum / pairs};
    total += cluster.cohesion;
    result.per_cluster.push_back(std::move(cluster));
  }
  if (result.per_cluster.empty())
    throw InsufficientDataError("no cluster has two top units to compare");
  result.mean_cohesion = total / static_cast<double>(result.per_cluster.size());
  return result;
}

CohesionResult cohesion_permutation_test(const ClusterModel& model,
                                         const Eigen::Ref<const MatrixXd>& vectors,
                                         const Eigen::Ref<const MatrixXd>& embeddings,
                                         GainRanking ranking, std::int64_t n_permutations,
                                         std::uint64_t seed, Eigen::Index top_m) {
  if (n_permutations < 1) throw std::invalid_argument("n_permutations must be positive");
  CohesionResult result = cluster_cohesion(model, vectors, embeddings, ranking, top_m);

  std::vector<double> replicates(static_cast<std::size_t>(n_permutations));
  parallel_for(replicates.size(), [&](std::size_t r) {
    Rng rng = make_rng(seed, r + 1);
    auto labels = model.assignments;
    std::shuffle(labels.begin(), labels.end(), rng);
    replicates[r] =
        cluster_cohesion(labels, model.k, vectors, embeddings, ranking, top_m).mean_cohesion;
  });

  PermutationTestResult test;
  test.observed = result.mean_cohesion;
  test.n_permutations = n_permutations;
  test.seed = seed;
  test.alternative = Alternative::greater;
  test.exceedances = std::count_if(replicates.begin(), replicates.end(),
                                   [&](double v) { return is_exceedance(v, test.observed); });
  test.p_value = smoothed_p_value(test.exceedances, n_permutations);
  result.test = test;
  return result;
}

Projection pca_project(const Eigen::Ref<const MatrixXd>& points, Eigen::Index out_dims) {
  if (points.rows() < 2) throw std::invalid_argument("projection needs at least 2 points");
  if (out_dims < 1) throw std::invalid_argument("out_dims must be positive");
  const Eigen::Index m = points.rows();
  const Eigen::Index n = points.cols();
  const MatrixXd centered = points.rowwise() - points.colwise().mean();

  Projection out;
  out.coordinates = MatrixXd::Zero(m, out_dims);
  out.explained_variance = VectorXd::Zero(out_dims);
  out.axes = MatrixXd::Zero(n, out_dims);

  const double total_variance = centered.squaredNorm();
  if (total_variance <= 0.0) return out;

  // Eigen-decompose whichever Gram side is smaller; eigenvalues ascend.
  const bool feature_side = n <= m;
  const MatrixXd gram = feature_side ? MatrixXd(centered.transpose() * centered)
                                     : MatrixXd(centered * centered.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  const Eigen::Index rank_limit = std::min(out_dims, gram.rows());
  for (Eigen::Index d = 0; d < rank_limit; ++d) {
    const Eigen::Index col = gram.rows() - 1 - d;
    const double variance = std::max(0.0, eig.eigenvalues()[col]);
    if (variance <= total_variance * 1e-24) break;
    VectorXd axis = feature_side ? VectorXd(eig.eigenvectors().col(col))
                                 : VectorXd(centered.transpose() * eig.eigenvectors().col(col));
    axis.normalize();
    Eigen::Index largest = 0;
    axis.cwiseAbs().maxCoeff(&largest);
    if (axis[largest] < 0) axis = -axis;
    out.axes.col(d) = axis;
    out.coordinates.col(d) = centered * axis;
    out.explained_variance[d] = variance / total_variance;
  }
  return out;
}

}  // namespace qlens
