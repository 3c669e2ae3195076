#ifndef QLENS_CORE_HPP
#define QLENS_CORE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qlens {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Row-major storage, one sample per row; matches the on-disk stage layout.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;
using RowMatrixXd = RowMatrix<double>;

inline constexpr const char* kVersion = "0.1.0";

// Bad bundle files or malformed bundle contents.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal numerical identity that should always hold did not.
class SelfCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a statistic needs more usable (non-degenerate) operators than exist.
class InsufficientDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Cohesion analysis needs the output-unit embedding matrix.
class MissingEmbeddingsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace qlens

#endif  // QLENS_CORE_HPP
