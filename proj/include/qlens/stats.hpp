#ifndef QLENS_STATS_HPP
#define QLENS_STATS_HPP

#include "qlens/core.hpp"
#include "qlens/operators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qlens {

enum class Alternative { greater, independence };
enum class SimilarityKind { unitary, hamiltonian };

std::string to_string(Alternative alternative);
std::string to_string(SimilarityKind kind);

/// Result of a one-sided permutation test. p = (1 + exceedances) / (1 + n).
struct PermutationTestResult {
  double observed = 0.0;
  double p_value = 1.0;
  std::int64_t n_permutations = 0;
  std::int64_t exceedances = 0;
  std::uint64_t seed = 0;
  Alternative alternative = Alternative::greater;
};

/// Add-one smoothed p-value.
double smoothed_p_value(std::int64_t exceedances, std::int64_t n_permutations);

/// Replicates at or above observed count as exceedances. The slack absorbs
/// summation-order rounding so exact ties are never lost.
bool is_exceedance(double replicate, double observed);

inline constexpr std::int64_t kDefaultSimilarityPermutations = 100;
inline constexpr std::int64_t kDefaultScalarPermutations = 9999;
inline constexpr std::size_t kDefaultOperatorCap = 500;

/// Mean over unordered pairs of non-degenerate operators of the closed-form
/// similarity. Degenerate operators are skipped; fewer than two usable ones
/// throws InsufficientDataError.
double mean_pairwise_similarity(const std::vector<Householder>& ops, SimilarityKind kind);

/// Randomized control: each operator is fitted between two states whose
/// distributions are independent Dirichlet(1) draws.
std::vector<Householder> sample_control_operators(std::size_t count, Eigen::Index n_outputs,
                                                  std::uint64_t seed);

/// State changes between independent Dirichlet(1) state pairs, one per row.
MatrixXd sample_control_deltas(std::size_t count, Eigen::Index n_outputs, std::uint64_t seed);

/// Two-sample permutation test on intra-group mean pairwise similarity.
/// observed = mean(A) - mean(B); replicates pool both groups and re-split at
/// the original sizes. Groups larger than operator_cap are subsampled
/// (seeded) first.
PermutationTestResult two_sample_permutation_test(const std::vector<Householder>& group_a,
                                                  const std::vector<Householder>& group_b,
                                                  SimilarityKind kind,
                                                  std::int64_t n_permutations,
                                                  std::uint64_t seed,
                                                  std::size_t operator_cap = kDefaultOperatorCap);

/// Szekely distance correlation between paired samples (one sample per row).
/// Zero when either sample has zero distance variance.
double distance_correlation(const Eigen::Ref<const MatrixXd>& x,
                            const Eigen::Ref<const MatrixXd>& y);

/// Permutation test of independence: replicates permute the pairing of y.
PermutationTestResult dcor_independence_test(const Eigen::Ref<const MatrixXd>& x,
                                             const Eigen::Ref<const MatrixXd>& y,
                                             std::int64_t n_permutations, std::uint64_t seed);

struct TopComponent {
  Eigen::Index unit = 0;
  std::optional<std::string> label;
  double value = 0.0;
};

struct DeltaPsiSummary {
  VectorXd mean_delta;
  double mean_magnitude = 0.0;
  PermutationTestResult magnitude_test;
  std::vector<TopComponent> top_components;
};

inline constexpr std::size_t kTopComponents = 10;

/// Bias test on state changes: statistic is the norm of the mean vector,
/// compared two-sample against control deltas. Deltas are rows.
DeltaPsiSummary mean_delta_test(const Eigen::Ref<const MatrixXd>& deltas,
                                const Eigen::Ref<const MatrixXd>& control_deltas,
                                std::int64_t n_permutations, std::uint64_t seed,
                                const std::vector<std::string>* labels = nullptr);

/// Non-degenerate operators only.
std::vector<Householder> usable_operators(const std::vector<Householder>& ops);

/// Stacks operator normals as rows.
MatrixXd normals_as_rows(const std::vector<Householder>& ops);

}  // namespace qlens

#endif  // QLENS_STATS_HPP
