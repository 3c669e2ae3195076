#ifndef QLENS_RANDOM_HPP
#define QLENS_RANDOM_HPP

#include "qlens/core.hpp"

#include <cstdint>
#include <random>

namespace qlens {

using Rng = std::mt19937_64;

/// Derives an independent child seed from (seed, stream). Randomized tasks
/// (permutation replicates, control draws) seed from their own index so the
/// result never depends on scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over a combined state
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

/// One draw from a symmetric Dirichlet(concentration) over n categories.
inline VectorXd sample_dirichlet(Rng& rng, Eigen::Index n, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  VectorXd draw(n);
  double total = 0.0;
  // Very small concentrations can underflow every gamma variate to zero.
  while (total <= 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) draw[i] = gamma(rng);
    total = draw.sum();
  }
  return draw / total;
}

}  // namespace qlens

#endif  // QLENS_RANDOM_HPP
