#pragma once

#include <vector>

#include "abibench/common.hpp"

namespace abibench::kernels {

// Inverse multiquadric mixture: k(u, v) = sum_s s^2 / (s^2 + ||u - v||^2).
struct KernelSpec {
  std::vector<double> scales{0.5, 1.0, 2.0, 4.0, 8.0};
};

// Squared Euclidean distance accumulated component by component. Both the
// kernel and its brute-force test oracle rely on this fixed summation order.
double squared_distance(const RowVector& u, const RowVector& v);

double imq_kernel(const RowVector& u, const RowVector& v, const KernelSpec& spec);

// Biased quadratic-time estimator over the rows of a and b:
//   (1/n^2) sum_ij k(a_i, a_j) + (1/m^2) sum_ij k(b_i, b_j)
//   - (2/nm) sum_ij k(a_i, b_j).
// Plain double loops; identical sets give exactly zero.
double mmd2_biased(const Matrix& a, const Matrix& b, const KernelSpec& spec);

}  // namespace abibench::kernels
