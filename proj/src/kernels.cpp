#include "abibench/kernels.hpp"

namespace abibench::kernels {

double squared_distance(const RowVector& u, const RowVector& v) {
  double d2 = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double d = u[k] - v[k];
    d2 += d * d;
  }
  return d2;
}

double imq_kernel(const RowVector& u, const RowVector& v, const KernelSpec& spec) {
  if (u.size() != v.size())
    throw ConfigError("imq_kernel: dimension mismatch");
  const double d2 = squared_distance(u, v);
  double k = 0.0;
  for (double s : spec.scales) {
    const double s2 = s * s;
    k += s2 / (s2 + d2);
  }
  return k;
}

double mmd2_biased(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  if (n == 0 || m == 0)
    throw ConfigError("mmd2_biased: empty point set");
  if (a.cols() != b.cols())
    throw ConfigError("mmd2_biased: dimension mismatch");

  double saa = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      saa += imq_kernel(a.row(i), a.row(j), spec);

  double sbb = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      sbb += imq_kernel(b.row(i), b.row(j), spec);

  double sab = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      sab += imq_kernel(a.row(i), b.row(j), spec);

  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return saa / (nn * nn) + sbb / (mm * mm) - 2.0 * sab / (nn * mm);
}

}  // namespace abibench::kernels
