#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hfr/error.hpp"
#include "hfr/hierarchy.hpp"
#include "hfr/matrix.hpp"

namespace hfr {

enum class WKind { ols, wls, structural, shrinkage };

inline const char* w_kind_name(WKind k) {
  switch (k) {
    case WKind::ols: return "ols";
    case WKind::wls: return "wls";
    case WKind::structural: return "structural";
    case WKind::shrinkage: return "shrinkage";
  }
  return "?";
}

// Estimate of the base forecast error covariance W_h. The proportionality
// constant k_h is fixed to 1 everywhere; it cancels in the combination
// matrix.
struct CovarianceEstimate {
  Matrix W;  // m x m, symmetric PSD
  WKind kind = WKind::ols;
  std::optional<double> lambda;         // shrinkage intensity (shrinkage only)
  std::vector<std::size_t> degenerate;  // series with zero residual variance,
                                        // excluded from the lambda sums
};

namespace detail {

// Non-centered second-moment matrix (1/T) E E' of the one-step residuals.
inline Matrix residual_covariance(const Matrix& residuals) {
  const std::size_t m = residuals.rows();
  const std::size_t t_count = residuals.cols();
  Matrix w(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < t_count; ++t) acc += residuals(i, t) * residuals(j, t);
      acc /= static_cast<double>(t_count);
      w(i, j) = acc;
      w(j, i) = acc;
    }
  return w;
}

}  // namespace detail

// Shrinkage intensity toward the diagonal target:
//   lambda_D = sum_{i != j} Var(r_ij) / sum_{i != j} r_ij^2,
// with Var(r_ij) = (1 - r_ij^2)^2 / (T - 1) and r_ij the one-step in-sample
// correlations. Series with zero variance are excluded from both sums and
// reported; an exactly-zero denominator yields lambda_D = 1 (pure diagonal
// target). Result clamped to [0, 1].
inline double shrinkage_lambda(const Matrix& w1, std::size_t t_count,
                               std::vector<std::size_t>* degenerate_out = nullptr) {
  const std::size_t m = w1.rows();
  std::vector<bool> degenerate(m, false);
  for (std::size_t i = 0; i < m; ++i)
    if (!(w1(i, i) > 0.0)) degenerate[i] = true;
  if (degenerate_out) {
    degenerate_out->clear();
    for (std::size_t i = 0; i < m; ++i)
      if (degenerate[i]) degenerate_out->push_back(i);
  }
  double var_sum = 0.0;
  double r2_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (degenerate[i]) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i || degenerate[j]) continue;
      const double r2 = (w1(i, j) * w1(i, j)) / (w1(i, i) * w1(j, j));
      const double one_minus = 1.0 - r2;
      var_sum += (one_minus * one_minus) / static_cast<double>(t_count - 1);
      r2_sum += r2;
    }
  }
  if (r2_sum == 0.0) return 1.0;
  double lambda = var_sum / r2_sum;
  if (lambda < 0.0) lambda = 0.0;
  if (lambda > 1.0) lambda = 1.0;
  return lambda;
}

// The four W_h estimators: identity (ols), residual variances (wls),
// diag(S*1) (structural), and correlation shrinkage toward the diagonal
// (shrinkage). Residuals are the m x T matrix of one-step-ahead in-sample
// base forecast errors; required for wls and shrinkage.
inline CovarianceEstimate estimate_w(WKind kind, const Hierarchy& h,
                                     const Matrix* residuals = nullptr) {
  const std::size_t m = h.m();
  CovarianceEstimate est;
  est.kind = kind;

  switch (kind) {
    case WKind::ols:
      est.W = Matrix::identity(m);
      return est;

    case WKind::structural: {
      est.W = Matrix(m, m);
      for (std::size_t i = 0; i < m; ++i)
        est.W(i, i) = static_cast<double>(h.bottom_descendants(static_cast<int>(i)).size());
      return est;
    }

    case WKind::wls:
    case WKind::shrinkage: {
      if (residuals == nullptr)
        throw Error(errc::missing_residuals,
                    std::string(w_kind_name(kind)) + " requires one-step residuals");
      if (residuals->rows() != m)
        throw Error(errc::dimension_mismatch, "residual matrix has " +
                                                  std::to_string(residuals->rows()) +
                                                  " rows, hierarchy has " + std::to_string(m));
      const std::size_t t_count = residuals->cols();
      if (t_count < 3)
        throw Error(errc::missing_residuals,
                    "need at least 3 residual columns, have " + std::to_string(t_count));
      const Matrix w1 = detail::residual_covariance(*residuals);
      if (kind == WKind::wls) {
        est.W = Matrix(m, m);
        for (std::size_t i = 0; i < m; ++i) est.W(i, i) = w1(i, i);
        return est;
      }
      const double lambda = shrinkage_lambda(w1, t_count, &est.degenerate);
      est.lambda = lambda;
      est.W = Matrix(m, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          est.W(i, j) = (i == j) ? w1(i, i) : (1.0 - lambda) * w1(i, j);
      return est;
    }
  }
  throw Error(errc::bad_format, "unreachable");
}

}  // namespace hfr
