#ifndef QLENS_STATEVEC_HPP
#define QLENS_STATEVEC_HPP

#include "qlens/bundle.hpp"
#include "qlens/core.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace qlens {

/// Square-root-probability representation of a distribution over output
/// units. Components are nonnegative and the vector has unit norm.
template <typename Scalar>
struct StateVector {
  Vector<Scalar> components;
  Eigen::Index stage = 0;
  Eigen::Index instance = 0;

  Eigen::Index size() const { return components.size(); }
};

using State = StateVector<double>;

/// Maps a distribution to its state vector, component k = sqrt(p_k).
///
/// The row is divided by its sum first so float-rounded exports still yield
/// unit-norm states. Throws std::invalid_argument when p is not a
/// distribution (negative entry or sum off by more than 1e-6).
template <typename Scalar = double, typename Derived>
StateVector<Scalar> state_from_probs(const Eigen::MatrixBase<Derived>& p) {
  const Vector<Scalar> q = p.template cast<Scalar>();
  if (q.size() == 0) throw std::invalid_argument("empty probability vector");
  if ((q.array() < Scalar(0)).any())
    throw std::invalid_argument("negative probability");
  const Scalar total = q.sum();
  if (!(std::abs(total - Scalar(1)) <= Scalar(kRowSumTolerance)))
    throw std::invalid_argument("probabilities do not sum to 1");
  StateVector<Scalar> state;
  state.components = (q.array() / total).sqrt().matrix();
  return state;
}

/// Born rule: p_k = psi_k^2.
template <typename Scalar>
Vector<Scalar> probs_from_state(const StateVector<Scalar>& state) {
  return state.components.array().square().matrix();
}

/// All states of a bundle, indexed by (instance, stage).
template <typename Scalar>
struct TrajectoryStates {
  Eigen::Index n_instances = 0;
  Eigen::Index n_stages = 0;
  std::vector<StateVector<Scalar>> states;

  const StateVector<Scalar>& at(Eigen::Index instance, Eigen::Index stage) const {
    return states[static_cast<std::size_t>(instance * n_stages + stage)];
  }
};

template <typename Scalar = double>
TrajectoryStates<Scalar> trajectory_states(const TrajectoryBundle& bundle) {
  TrajectoryStates<Scalar> out;
  out.n_instances = bundle.n_instances;
  out.n_stages = bundle.n_stages;
  out.states.reserve(static_cast<std::size_t>(bundle.n_instances * bundle.n_stages));
  for (Eigen::Index m = 0; m < bundle.n_instances; ++m) {
    for (Eigen::Index s = 0; s < bundle.n_stages; ++s) {
      auto state = state_from_probs<Scalar>(bundle.row(m, s).transpose());
      state.stage = s;
      state.instance = m;
      out.states.push_back(std::move(state));
    }
  }
  return out;
}

}  // namespace qlens

#endif  // QLENS_STATEVEC_HPP
