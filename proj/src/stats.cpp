#include "qlens/stats.hpp"

#include "qlens/parallel.hpp"
#include "qlens/random.hpp"
#include "qlens/statevec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qlens {

std::string to_string(Alternative alternative) {
  return alternative == Alternative::greater ? "greater" : "independence";
}

std::string to_string(SimilarityKind kind) {
  return kind == SimilarityKind::unitary ? "unitary" : "hamiltonian";
}

double smoothed_p_value(std::int64_t exceedances, std::int64_t n_permutations) {
  return static_cast<double>(1 + exceedances) / static_cast<double>(1 + n_permutations);
}

bool is_exceedance(double replicate, double observed) {
  return replicate >= observed - 1e-12 * std::max(1.0, std::abs(observed));
}

std::vector<Householder> usable_operators(const std::vector<Householder>& ops) {
  std::vector<Householder> out;
  std::copy_if(ops.begin(), ops.end(), std::back_inserter(out),
               [](const Householder& op) { return !op.degenerate; });
  return out;
}

MatrixXd normals_as_rows(const std::vector<Householder>& ops) {
  if (ops.empty()) return MatrixXd();
  MatrixXd rows(static_cast<Eigen::Index>(ops.size()), ops.front().size());
  for (std::size_t i = 0; i < ops.size(); ++i) {
    detail::require_same_size(ops[i].size(), rows.cols(), "normals_as_rows");
    rows.row(static_cast<Eigen::Index>(i)) = ops[i].normal.transpose();
  }
  return rows;
}

namespace {

// Turns a mean squared cosine into the requested similarity's units. The
// unitary similarity is affine in <u,v>^2.
double to_kind(double mean_squared_cosine, SimilarityKind kind, Eigen::Index n) {
  if (kind == SimilarityKind::hamiltonian) return mean_squared_cosine;
  const double dim = static_cast<double>(n);
  return (dim - 4.0) / dim + 4.0 / dim * mean_squared_cosine;
}

double pair_count(std::size_t m) { return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1); }

// Sum over i < j of squared cosines among rows from the smaller Gram side.
double sum_pairwise_squared_cosines(const MatrixXd& normals) {
  const double frob = normals.rows() <= normals.cols()
                          ? (normals * normals.transpose()).squaredNorm()
                          : (normals.transpose() * normals).squaredNorm();
  const double diagonal = normals.rowwise().squaredNorm().array().square().sum();
  return 0.5 * (frob - diagonal);
}

// Mean squared cosine over pairs drawn from `members` (sorted indices into the
// pooled squared-cosine matrix).
double mean_within(const MatrixXd& squared_cosines, std::vector<Eigen::Index> members) {
  std::sort(members.begin(), members.end());
  double total = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a)
    for (std::size_t b = a + 1; b < members.size(); ++b)
      total += squared_cosines(members[a], members[b]);
  return total / pair_count(members.size());
}

std::vector<Householder> subsample(const std::vector<Householder>& ops, std::size_t cap, Rng& rng) {
  if (ops.size() <= cap) return ops;
  std::vector<std::size_t> order(ops.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(cap);
  std::sort(order.begin(), order.end());
  std::vector<Householder> out;
  for (auto i : order) out.push_back(ops[i]);
  return out;
}

}  // namespace

double mean_pairwise_similarity(const std::vector<Householder>& ops, SimilarityKind kind) {
  const auto usable = usable_operators(ops);
  if (usable.size() < 2)
    throw InsufficientDataError("insufficient non-degenerate operators (need at least 2)");
  const MatrixXd normals = normals_as_rows(usable);
  const double mean = sum_pairwise_squared_cosines(normals) / pair_count(usable.size());
  return to_kind(mean, kind, normals.cols());
}

std::vector<Householder> sample_control_operators(std::size_t count, Eigen::Index n_outputs,
                                                  std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("control count must be positive");
  if (n_outputs < 2) throw std::invalid_argument("controls need at least 2 output units");
  std::vector<Householder> controls(count);
  parallel_for(count, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    const State a = state_from_probs(sample_dirichlet(rng, n_outputs, 1.0));
    const State b = state_from_probs(sample_dirichlet(rng, n_outputs, 1.0));
    controls[i] = fit_householder(a, b);
    controls[i].instance = static_cast<Eigen::Index>(i);
  });
  return controls;
}

MatrixXd sample_control_deltas(std::size_t count, Eigen::Index n_outputs, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("control count must be positive");
  MatrixXd deltas(static_cast<Eigen::Index>(count), n_outputs);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, i);
    const State a = state_from_probs(sample_dirichlet(rng, n_outputs, 1.0));
    const State b = state_from_probs(sample_dirichlet(rng, n_outputs, 1.0));
    deltas.row(static_cast<Eigen::Index>(i)) = (b.components - a.components).transpose();
  }
  return deltas;
}

PermutationTestResult two_sample_permutation_test(const std::vector<Householder>& group_a,
                                                  const std::vector<Householder>& group_b,
                                                  SimilarityKind kind,
                                                  std::int64_t n_permutations, std::uint64_t seed,
                                                  std::size_t operator_cap) {
  if (n_permutations < 1) throw std::invalid_argument("n_permutations must be positive");
  if (operator_cap < 2) throw std::invalid_argument("operator cap must be at least 2");
  Rng sampler = make_rng(seed, 0);
  const auto a = subsample(usable_operators(group_a), operator_cap, sampler);
  const auto b = subsample(usable_operators(group_b), operator_cap, sampler);
  if (a.size() < 2 || b.size() < 2)
    throw InsufficientDataError("insufficient non-degenerate operators (need at least 2 per group)");

  std::vector<Householder> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const MatrixXd normals = normals_as_rows(pooled);
  const MatrixXd squared_cosines = (normals * normals.transpose()).array().square().matrix();
  const Eigen::Index n = normals.cols();

  const auto split_statistic = [&](const std::vector<Eigen::Index>& order) {
    const auto mid = order.begin() + static_cast<std::ptrdiff_t>(a.size());
    const double mean_a = mean_within(squared_cosines, {order.begin(), mid});
    const double mean_b = mean_within(squared_cosines, {mid, order.end()});
    return to_kind(mean_a, kind, n) - to_kind(mean_b, kind, n);
  };

  std::vector<Eigen::Index> identity(pooled.size());
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});

  PermutationTestResult result;
  result.observed = split_statistic(identity);
  result.n_permutations = n_permutations;
  result.seed = seed;
  result.alternative = Alternative::greater;

  std::vector<double> replicates(static_cast<std::size_t>(n_permutations));
  parallel_for(replicates.size(), [&](std::size_t r) {
    Rng rng = make_rng(seed, r + 1);
    auto order = identity;
    std::shuffle(order.begin(), order.end(), rng);
    replicates[r] = split_statistic(order);
  });
  result.exceedances = std::count_if(replicates.begin(), replicates.end(),
                                     [&](double x) { return is_exceedance(x, result.observed); });
  result.p_value = smoothed_p_value(result.exceedances, n_permutations);
  return result;
}

namespace {

// Double-centred Euclidean distance matrix of the rows of x.
MatrixXd centered_distances(const Eigen::Ref<const MatrixXd>& x) {
  const Eigen::Index m = x.rows();
  MatrixXd d(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < m; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
  }
  const VectorXd row_means = d.rowwise().mean();
  const double grand_mean = row_means.mean();
  d.colwise() -= row_means;
  d.rowwise() -= row_means.transpose();
  d.array() += grand_mean;
  return d;
}

void require_paired(const Eigen::Ref<const MatrixXd>& x, const Eigen::Ref<const MatrixXd>& y) {
  if (x.rows() != y.rows())
    throw std::invalid_argument("distance correlation needs paired samples of equal length");
  if (x.rows() < 2) throw std::invalid_argument("distance correlation needs at least 2 samples");
}

struct CenteredPair {
  MatrixXd a;
  MatrixXd b;
  double scale = 0.0;  // sqrt(dVar^2(x) dVar^2(y)) * m^2, zero when either is constant

  // dCor with y's samples reordered by perm.
  double dcor(const std::vector<Eigen::Index>& perm) const {
    if (scale <= 0.0) return 0.0;
    const Eigen::Index m = a.rows();
    double cross = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index pi = perm[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < m; ++j) cross += a(j, i) * b(perm[static_cast<std::size_t>(j)], pi);
    }
    return std::sqrt(std::clamp(cross / scale, 0.0, 1.0));
  }
};

CenteredPair center_pair(const Eigen::Ref<const MatrixXd>& x, const Eigen::Ref<const MatrixXd>& y) {
  CenteredPair pair{centered_distances(x), centered_distances(y), 0.0};
  const double var_x = pair.a.squaredNorm();
  const double var_y = pair.b.squaredNorm();
  if (var_x > 0.0 && var_y > 0.0) pair.scale = std::sqrt(var_x * var_y);
  return pair;
}

}  // namespace

double distance_correlation(const Eigen::Ref<const MatrixXd>& x,
                            const Eigen::Ref<const MatrixXd>& y) {
  require_paired(x, y);
  const auto pair = center_pair(x, y);
  std::vector<Eigen::Index> identity(static_cast<std::size_t>(x.rows()));
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});
  return pair.dcor(identity);
}

PermutationTestResult dcor_independence_test(const Eigen::Ref<const MatrixXd>& x,
                                             const Eigen::Ref<const MatrixXd>& y,
                                             std::int64_t n_permutations, std::uint64_t seed) {
  require_paired(x, y);
  if (n_permutations < 1) throw std::invalid_argument("n_permutations must be positive");
  const auto pair = center_pair(x, y);
  std::vector<Eigen::Index> identity(static_cast<std::size_t>(x.rows()));
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});

  PermutationTestResult result;
  result.observed = pair.dcor(identity);
  result.n_permutations = n_permutations;
  result.seed = seed;
  result.alternative = Alternative::independence;

  std::vector<double> replicates(static_cast<std::size_t>(n_permutations));
  parallel_for(replicates.size(), [&](std::size_t r) {
    Rng rng = make_rng(seed, r + 1);
    auto perm = identity;
    std::shuffle(perm.begin(), perm.end(), rng);
    replicates[r] = pair.dcor(perm);
  });
  result.exceedances = std::count_if(replicates.begin(), replicates.end(),
                                     [&](double v) { return is_exceedance(v, result.observed); });
  result.p_value = smoothed_p_value(result.exceedances, n_permutations);
  return result;
}

DeltaPsiSummary mean_delta_test(const Eigen::Ref<const MatrixXd>& deltas,
                                const Eigen::Ref<const MatrixXd>& control_deltas,
                                std::int64_t n_permutations, std::uint64_t seed,
                                const std::vector<std::string>* labels) {
  if (deltas.rows() < 1 || control_deltas.rows() < 1)
    throw std::invalid_argument("mean_delta_test needs nonempty delta and control sets");
  if (deltas.cols() != control_deltas.cols())
    throw std::invalid_argument("mean_delta_test: dimension mismatch");
  if (n_permutations < 1) throw std::invalid_argument("n_permutations must be positive");
  if (labels && static_cast<Eigen::Index>(labels->size()) != deltas.cols())
    throw std::invalid_argument("mean_delta_test: label count does not match dimension");

  const Eigen::Index m = deltas.rows();
  const Eigen::Index total = m + control_deltas.rows();
  MatrixXd pooled(total, deltas.cols());
  pooled << deltas, control_deltas;
  const VectorXd pooled_sum = pooled.colwise().sum().transpose();

  const auto split_statistic = [&](const VectorXd& sum_a) {
    const VectorXd sum_b = pooled_sum - sum_a;
    return (sum_a / static_cast<double>(m)).norm() -
           (sum_b / static_cast<double>(total - m)).norm();
  };

  DeltaPsiSummary summary;
  summary.mean_delta = deltas.colwise().mean().transpose();
  summary.mean_magnitude = summary.mean_delta.norm();

  auto& test = summary.magnitude_test;
  test.observed = split_statistic(deltas.colwise().sum().transpose());
  test.n_permutations = n_permutations;
  test.seed = seed;
  test.alternative = Alternative::greater;

  std::vector<double> replicates(static_cast<std::size_t>(n_permutations));
  parallel_for(replicates.size(), [&](std::size_t r) {
    Rng rng = make_rng(seed, r + 1);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    VectorXd sum_a = VectorXd::Zero(pooled.cols());
    for (Eigen::Index i = 0; i < m; ++i) sum_a += pooled.row(order[static_cast<std::size_t>(i)]).transpose();
    replicates[r] = split_statistic(sum_a);
  });
  test.exceedances = std::count_if(replicates.begin(), replicates.end(),
                                   [&](double v) { return is_exceedance(v, test.observed); });
  test.p_value = smoothed_p_value(test.exceedances, n_permutations);

  std::vector<Eigen::Index> units(static_cast<std::size_t>(summary.mean_delta.size()));
  std::iota(units.begin(), units.end(), Eigen::Index{0});
  const auto top = std::min(units.size(), kTopComponents);
  std::partial_sort(units.begin(), units.begin() + static_cast<std::ptrdiff_t>(top), units.end(),
                    [&](Eigen::Index lhs, Eigen::Index rhs) {
                      const double l = summary.mean_delta[lhs];
                      const double r = summary.mean_delta[rhs];
                      return l != r ? l > r : lhs < rhs;
                    });
  for (std::size_t i = 0; i < top; ++i) {
    TopComponent c;
    c.unit = units[i];
    c.value = summary.mean_delta[c.unit];
    if (labels) c.label = (*labels)[static_cast<std::size_t>(c.unit)];
    summary.top_components.push_back(std::move(c));
  }
  return summary;
}

}  // namespace qlens
