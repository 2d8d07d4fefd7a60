#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace abibench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Bad config files, manifests, shape mismatches, unusable inputs. CLI maps to exit 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf or other numerical breakdown. CLI maps to exit 2.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : ConfigError {
  explicit DataError(const std::string& msg) : ConfigError(msg) {}
};

// Matrix product whose every output element accumulates over k in ascending
// order with a single accumulator. Unlike blocked GEMM kernels, the result
// for a given row depends only on that row's data, never on where the row
// sits in the batch or how many rows accompany it. Every batched network
// forward goes through this product so that per-row outputs (and anything
// pooled from them with sorted reductions) are bit-identical under row
// permutations of the input.
inline Matrix det_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ConfigError("det_matmul: inner dimension mismatch");
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      double* cj = c.col(j).data();
      const double* ak = a.col(k).data();
      for (Eigen::Index i = 0; i < a.rows(); ++i) cj[i] += ak[i] * bkj;
    }
  return c;
}

}  // namespace abibench
