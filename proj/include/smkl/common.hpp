#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace smkl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Points are stored row-wise: row i is the i-th observation in [0,1]^p.
using PointSet = Eigen::MatrixXd;

/// Caller supplied an argument outside the operation's domain.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data violates a numerical invariant (e.g. a Gram matrix that is not PSD).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative routine failed to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

}  // namespace smkl
