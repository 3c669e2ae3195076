#ifndef QLENS_OPERATORS_HPP
#define QLENS_OPERATORS_HPP

#include "qlens/core.hpp"
#include "qlens/statevec.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qlens {

inline constexpr double kDegenerateThreshold = 1e-12;
inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr Eigen::Index kDefaultDenseCap = 4096;

/// Householder reflection U = I - 2 v v^T, stored by its unit normal v.
///
/// The sign of v is fixed so that <v, psi_in> >= 0: v points from the output
/// state toward the input state. A degenerate operator is the identity
/// (input and output coincide) and carries a zero normal.
template <typename Scalar>
struct HouseholderOperator {
  Vector<Scalar> normal;
  bool degenerate = false;
  Eigen::Index stage = 0;
  Eigen::Index instance = 0;

  Eigen::Index size() const { return normal.size(); }
};

/// H = E v v^T with exp(-i alpha H) = I - 2 v v^T on the principal branch
/// (alpha * E = pi). Degenerate operators map to the zero Hamiltonian.
template <typename Scalar>
struct RankOneHamiltonian {
  Vector<Scalar> normal;
  Scalar energy = 0;
  Scalar alpha = 1;

  Eigen::Index size() const { return normal.size(); }
};

template <typename Scalar>
struct DeltaPsi {
  Vector<Scalar> components;
  Eigen::Index layer = 0;
};

using Householder = HouseholderOperator<double>;
using Hamiltonian = RankOneHamiltonian<double>;

namespace detail {

inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
}

inline void require_dense_cap(Eigen::Index n, Eigen::Index cap) {
  if (n > cap)
    throw std::length_error("dense materialization of a " + std::to_string(n) + "x" +
                            std::to_string(n) + " matrix exceeds the dense cap of " +
                            std::to_string(cap));
}

template <typename Scalar>
void require_unit(const Vector<Scalar>& v, const char* what) {
  if (!(std::abs(v.norm() - Scalar(1)) <= Scalar(kUnitNormTolerance)))
    throw std::invalid_argument(std::string(what) + " is not unit norm");
}

template <typename Scalar>
void require_usable(const HouseholderOperator<Scalar>& op) {
  if (op.degenerate)
    throw std::invalid_argument("similarity undefined for a degenerate (identity) operator");
}

}  // namespace detail

/// Fits the Householder reflection that maps psi_in onto psi_out.
template <typename Scalar>
HouseholderOperator<Scalar> fit_householder(const StateVector<Scalar>& psi_in,
                                            const StateVector<Scalar>& psi_out) {
  detail::require_same_size(psi_in.size(), psi_out.size(), "fit_householder");
  detail::require_unit(psi_in.components, "input state");
  detail::require_unit(psi_out.components, "output state");

  HouseholderOperator<Scalar> op;
  op.stage = psi_out.stage;
  op.instance = psi_in.instance;
  Vector<Scalar> diff = psi_in.components - psi_out.components;
  const Scalar gap = diff.norm();
  if (gap < Scalar(kDegenerateThreshold)) {
    op.degenerate = true;
    op.normal = Vector<Scalar>::Zero(psi_in.size());
    return op;
  }
  // <diff, psi_in> = 1 - <psi_in, psi_out> >= 0, so the sign convention holds.
  op.normal = diff / gap;
  return op;
}

/// U psi = psi - 2 <v, psi> v, without forming U.
template <typename Scalar, typename Derived>
Vector<Scalar> apply_operator(const HouseholderOperator<Scalar>& op,
                              const Eigen::MatrixBase<Derived>& psi) {
  detail::require_same_size(op.size(), psi.size(), "apply_operator");
  if (op.degenerate) return psi;
  return psi - Scalar(2) * op.normal.dot(psi) * op.normal;
}

template <typename Scalar>
Vector<Scalar> apply_operator(const HouseholderOperator<Scalar>& op,
                              const StateVector<Scalar>& psi) {
  return apply_operator(op, psi.components);
}

template <typename Scalar>
Matrix<Scalar> materialize_unitary(const HouseholderOperator<Scalar>& op,
                                   Eigen::Index dense_cap = kDefaultDenseCap) {
  detail::require_dense_cap(op.size(), dense_cap);
  Matrix<Scalar> u = Matrix<Scalar>::Identity(op.size(), op.size());
  if (!op.degenerate) u.noalias() -= Scalar(2) * op.normal * op.normal.transpose();
  return u;
}

template <typename Scalar>
RankOneHamiltonian<Scalar> hamiltonian_of(const HouseholderOperator<Scalar>& op,
                                          Scalar alpha = Scalar(1)) {
  if (!(alpha > Scalar(0))) throw std::invalid_argument("alpha must be positive");
  RankOneHamiltonian<Scalar> h;
  h.normal = op.normal;
  h.alpha = alpha;
  h.energy = op.degenerate ? Scalar(0) : std::numbers::pi_v<Scalar> / alpha;
  return h;
}

template <typename Scalar>
Matrix<Scalar> materialize_hamiltonian(const RankOneHamiltonian<Scalar>& h,
                                       Eigen::Index dense_cap = kDefaultDenseCap) {
  detail::require_dense_cap(h.size(), dense_cap);
  return h.energy * h.normal * h.normal.transpose();
}

/// exp(-i alpha H) for a dense symmetric H, via its eigendecomposition
/// H = Q diag(E) Q^T.
template <typename Scalar>
Matrix<std::complex<Scalar>> propagator(const Matrix<Scalar>& hamiltonian, Scalar alpha,
                                        Eigen::Index dense_cap = kDefaultDenseCap) {
  detail::require_dense_cap(hamiltonian.rows(), dense_cap);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(hamiltonian);
  if (eig.info() != Eigen::Success) throw SelfCheckError("eigendecomposition failed");
  using Complex = std::complex<Scalar>;
  const Matrix<Complex> q = eig.eigenvectors().template cast<Complex>();
  Vector<Complex> phases(eig.eigenvalues().size());
  for (Eigen::Index j = 0; j < phases.size(); ++j)
    phases[j] = std::exp(Complex(0, -alpha * eig.eigenvalues()[j]));
  return q * phases.asDiagonal() * q.adjoint();
}

/// State change over a layer from the Hamiltonian's eigenpairs:
///   sum_j k_j (exp(-i alpha E_j) - 1) |E_j>,  k_j = <E_j | psi_in>.
///
/// For a rank-1 H the eigenbasis is {v} plus its orthogonal complement; the
/// complement has E = 0 and contributes nothing, so only the v term is
/// evaluated. The imaginary part vanishes on the principal branch up to
/// rounding and is dropped.
template <typename Scalar, typename Derived>
DeltaPsi<Scalar> delta_psi_spectral(const RankOneHamiltonian<Scalar>& h,
                                    const Eigen::MatrixBase<Derived>& psi_in) {
  detail::require_same_size(h.size(), psi_in.size(), "delta_psi_spectral");
  using Complex = std::complex<Scalar>;
  DeltaPsi<Scalar> delta;
  const Scalar coefficient = h.normal.dot(psi_in);
  const Complex factor = std::exp(Complex(0, -h.alpha * h.energy)) - Complex(1);
  delta.components = (coefficient * factor.real()) * h.normal;
  return delta;
}

template <typename Scalar>
DeltaPsi<Scalar> delta_psi_spectral(const RankOneHamiltonian<Scalar>& h,
                                    const StateVector<Scalar>& psi_in) {
  auto delta = delta_psi_spectral(h, psi_in.components);
  delta.layer = psi_in.stage + 1;
  return delta;
}

/// Frobenius cosine of two Householder unitaries,
/// tr(U1^T U2) / (|U1|_F |U2|_F) = (N - 4 + 4 <u,v>^2) / N.
template <typename Scalar>
Scalar unitary_frobenius_similarity(const HouseholderOperator<Scalar>& a,
                                    const HouseholderOperator<Scalar>& b) {
  detail::require_same_size(a.size(), b.size(), "unitary_frobenius_similarity");
  detail::require_usable(a);
  detail::require_usable(b);
  const Scalar n = static_cast<Scalar>(a.size());
  const Scalar c = a.normal.dot(b.normal);
  return (n - Scalar(4) + Scalar(4) * c * c) / n;
}

/// Frobenius cosine of E u u^T and E v v^T, which is <u,v>^2 for any E and
/// alpha.
template <typename Scalar>
Scalar hamiltonian_frobenius_similarity(const HouseholderOperator<Scalar>& a,
                                        const HouseholderOperator<Scalar>& b) {
  detail::require_same_size(a.size(), b.size(), "hamiltonian_frobenius_similarity");
  detail::require_usable(a);
  detail::require_usable(b);
  const Scalar c = a.normal.dot(b.normal);
  return c * c;
}

}  // namespace qlens

#endif  // QLENS_OPERATORS_HPP
