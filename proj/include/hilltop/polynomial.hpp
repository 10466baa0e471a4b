#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace hilltop {

/// Real roots of c[0] x^n + c[1] x^(n-1) + ... + c[n] from the eigenvalues of
/// the companion matrix. Roots whose imaginary part is below `imag_tol` (relative
/// to max(1, |root|)) are reported by their real part; callers polish them.
inline std::vector<double> polynomial_real_roots(std::span<const double> c,
                                                 double imag_tol = 1e-6) {
  std::size_t first = 0;
  while (first < c.size() && c[first] == 0.0) ++first;
  const int n = static_cast<int>(c.size() - first) - 1;
  std::vector<double> roots;
  if (n < 1) return roots;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) companion(0, k) = -c[first + 1 + k] / c[first];
  for (int k = 1; k < n; ++k) companion(k, k - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  for (int k = 0; k < n; ++k) {
    const auto z = es.eigenvalues()(k);
    if (std::abs(z.imag()) <= imag_tol * std::max(1.0, std::abs(z))) roots.push_back(z.real());
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace hilltop
