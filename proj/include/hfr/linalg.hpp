#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "hfr/matrix.hpp"

namespace hfr::linalg {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const EMat> map(const Matrix& a) {
  return Eigen::Map<const EMat>(a.data(), static_cast<Eigen::Index>(a.rows()),
                                static_cast<Eigen::Index>(a.cols()));
}

inline Matrix from_eigen(const EMat& e) {
  Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  Eigen::Map<EMat>(m.data(), e.rows(), e.cols()) = e;
  return m;
}

// Moore-Penrose inverse of a symmetric PSD matrix via eigendecomposition.
// Eigenvalues below rel_tol * max eigenvalue are treated as null space.
inline Matrix sym_pseudo_inverse(const Matrix& w, double rel_tol = 1e-10) {
  const auto n = static_cast<Eigen::Index>(w.rows());
  EMat sym = 0.5 * (map(w) + map(w).transpose());
  Eigen::SelfAdjointEigenSolver<EMat> eig(sym);
  const auto& values = eig.eigenvalues();
  const double vmax = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = rel_tol * vmax;
  Eigen::VectorXd inv(n);
  for (Eigen::Index i = 0; i < n; ++i)
    inv[i] = values[i] > cutoff ? 1.0 / values[i] : 0.0;
  EMat result = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return from_eigen(result);
}

// Ordinary least squares; nullopt when the design is rank-deficient
// (callers fall back to a simpler model).
inline std::optional<std::vector<double>> solve_least_squares(const Matrix& x,
                                                              std::span<const double> y) {
  const auto rows = static_cast<Eigen::Index>(x.rows());
  const auto cols = static_cast<Eigen::Index>(x.cols());
  if (cols == 0 || rows < cols) return std::nullopt;
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), rows);
  Eigen::ColPivHouseholderQR<EMat> qr(map(x));
  if (qr.rank() < cols) return std::nullopt;
  Eigen::VectorXd beta = qr.solve(yv);
  return std::vector<double>(beta.data(), beta.data() + beta.size());
}

}  // namespace hfr::linalg
