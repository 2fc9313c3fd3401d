#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hfr/covariance.hpp"
#include "hfr/error.hpp"
#include "hfr/forecast.hpp"
#include "hfr/hierarchy.hpp"
#include "hfr/linalg.hpp"
#include "hfr/matrix.hpp"

namespace hfr {

// The combiner mapping all m base forecasts to the m_k bottom series, so
// that reconciled forecasts are S * G * base. Stored m_k x m.
struct GMatrix {
  Matrix g;  // m_k x m
  std::string method_tag;
};

enum class TdScheme { avg_hist, hist_avg, forecasted };

inline const char* td_scheme_name(TdScheme s) {
  switch (s) {
    case TdScheme::avg_hist: return "td1";
    case TdScheme::hist_avg: return "td2";
    case TdScheme::forecasted: return "fp";
  }
  return "?";
}

// Disaggregation proportions for the bottom series. For the historical
// schemes the vector sums to 1 by construction; for forecasted proportions
// it sums to 1 whenever no intermediate forecast sum is zero.
struct ProportionVector {
  std::vector<double> p;  // length m_k, entries >= 0 for positive data
  TdScheme scheme = TdScheme::avg_hist;
};

// ---------------------------------------------------------------------------
// Bottom-up
// ---------------------------------------------------------------------------

inline GMatrix g_bottom_up(const Hierarchy& h) {
  const std::size_t m = h.m();
  const std::size_t mk = h.bottom_count();
  GMatrix out{Matrix(mk, m), "bu"};
  for (std::size_t j = 0; j < mk; ++j) out.g(j, m - mk + j) = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Top-down
// ---------------------------------------------------------------------------

// Historical proportions:
//   avg_hist: p_j = (1/n) * sum_t Y_jt / Y_t      (average of proportions)
//   hist_avg: p_j = sum_t Y_jt / sum_t Y_t        (proportion of averages)
// Forecasted proportions: per bottom series, the product over levels of
// (ancestor forecast) / (sum of forecasts of that ancestor's parent's
// children), evaluated at one horizon step of the base panel.
inline ProportionVector td_proportions(const SeriesPanel& panel, const Hierarchy& h, TdScheme scheme,
                                       const ForecastPanel* base = nullptr, int step = 1) {
  const std::size_t mk = h.bottom_count();
  ProportionVector out;
  out.scheme = scheme;
  out.p.assign(mk, 0.0);

  if (scheme == TdScheme::avg_hist || scheme == TdScheme::hist_avg) {
    const std::size_t n = panel.n();
    if (panel.m() != h.m())
      throw Error(errc::dimension_mismatch, "panel does not match hierarchy");
    const auto top = panel.row(0);
    if (scheme == TdScheme::avg_hist) {
      for (std::size_t t = 0; t < n; ++t)
        if (top[t] == 0.0)
          throw Error(errc::zero_total, "total is zero at t = " + std::to_string(t + 1));
      for (std::size_t j = 0; j < mk; ++j) {
        const auto row = panel.row(static_cast<std::size_t>(h.bottom_node(static_cast<int>(j))));
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) acc += row[t] / top[t];
        out.p[j] = acc / static_cast<double>(n);
      }
    } else {
      double denom = 0.0;
      for (std::size_t t = 0; t < n; ++t) denom += top[t];
      if (denom == 0.0) throw Error(errc::zero_total, "sum of totals is zero");
      for (std::size_t j = 0; j < mk; ++j) {
        const auto row = panel.row(static_cast<std::size_t>(h.bottom_node(static_cast<int>(j))));
        double num = 0.0;
        for (std::size_t t = 0; t < n; ++t) num += row[t];
        out.p[j] = num / denom;
      }
    }
    return out;
  }

  // Forecasted proportions.
  if (base == nullptr)
    throw Error(errc::bad_format, "forecasted proportions need a base forecast panel");
  if (base->m() != h.m())
    throw Error(errc::dimension_mismatch, "base panel does not match hierarchy");
  if (step < 1 || static_cast<std::size_t>(step) > base->horizon())
    throw Error(errc::bad_format, "step " + std::to_string(step) + " outside horizon");
  const std::size_t col = static_cast<std::size_t>(step - 1);

  // Sum of the children's forecasts per internal node.
  std::vector<double> child_sum(h.m(), 0.0);
  for (std::size_t i = 0; i < h.m(); ++i)
    for (int c : h.children(static_cast<int>(i)))
      child_sum[i] += base->values(static_cast<std::size_t>(c), col);

  for (std::size_t j = 0; j < mk; ++j) {
    int node = h.bottom_node(static_cast<int>(j));
    double p = 1.0;
    while (h.nodes()[static_cast<std::size_t>(node)].parent >= 0) {
      const int parent = h.nodes()[static_cast<std::size_t>(node)].parent;
      if (child_sum[static_cast<std::size_t>(parent)] == 0.0)
        throw Error(errc::zero_total, "forecast sum below node '" +
                                          h.nodes()[static_cast<std::size_t>(parent)].id +
                                          "' is zero at step " + std::to_string(step));
      p *= base->values(static_cast<std::size_t>(node), col) /
           child_sum[static_cast<std::size_t>(parent)];
      node = parent;
    }
    out.p[j] = p;
  }
  return out;
}

// G = [g | 0]: the base forecast of the top node is split by p; every other
// base forecast is ignored. Reconciled top level equals the base top level.
inline GMatrix g_top_down(const Hierarchy& h, const ProportionVector& p) {
  const std::size_t mk = h.bottom_count();
  if (p.p.size() != mk)
    throw Error(errc::dimension_mismatch, "proportion vector length " + std::to_string(p.p.size()) +
                                              ", bottom count " + std::to_string(mk));
  GMatrix out{Matrix(mk, h.m()), std::string("td-") + td_scheme_name(p.scheme)};
  for (std::size_t j = 0; j < mk; ++j) out.g(j, 0) = p.p[j];
  return out;
}

// ---------------------------------------------------------------------------
// Middle-out
// ---------------------------------------------------------------------------

// Within-subtree historical proportions for every node at anchor_level,
// ordered as the anchor nodes appear in the hierarchy.
inline std::vector<ProportionVector> subtree_proportions(const SeriesPanel& panel,
                                                         const Hierarchy& h, int anchor_level,
                                                         TdScheme scheme) {
  if (anchor_level < 0 || anchor_level > h.depth())
    throw Error(errc::invalid_level, "anchor level " + std::to_string(anchor_level));
  if (scheme == TdScheme::forecasted)
    throw Error(errc::bad_format, "middle-out uses historical proportion schemes");
  const std::size_t n = panel.n();
  const std::size_t offset = h.level_offset(anchor_level);
  const std::size_t count = h.level_counts()[static_cast<std::size_t>(anchor_level)];
  std::vector<ProportionVector> out(count);
  for (std::size_t a = 0; a < count; ++a) {
    const int anchor = static_cast<int>(offset + a);
    const auto bottoms = h.bottom_descendants(anchor);
    const auto anchor_row = panel.row(static_cast<std::size_t>(anchor));
    out[a].scheme = scheme;
    out[a].p.assign(bottoms.size(), 0.0);
    if (scheme == TdScheme::avg_hist) {
      for (std::size_t t = 0; t < n; ++t)
        if (anchor_row[t] == 0.0)
          throw Error(errc::zero_total, "anchor '" + h.nodes()[static_cast<std::size_t>(anchor)].id +
                                            "' is zero at t = " + std::to_string(t + 1));
      for (std::size_t b = 0; b < bottoms.size(); ++b) {
        const auto row = panel.row(static_cast<std::size_t>(h.bottom_node(bottoms[b])));
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) acc += row[t] / anchor_row[t];
        out[a].p[b] = acc / static_cast<double>(n);
      }
    } else {
      double denom = 0.0;
      for (std::size_t t = 0; t < n; ++t) denom += anchor_row[t];
      if (denom == 0.0)
        throw Error(errc::zero_total, "anchor '" + h.nodes()[static_cast<std::size_t>(anchor)].id +
                                          "' sums to zero");
      for (std::size_t b = 0; b < bottoms.size(); ++b) {
        const auto row = panel.row(static_cast<std::size_t>(h.bottom_node(bottoms[b])));
        double num = 0.0;
        for (std::size_t t = 0; t < n; ++t) num += row[t];
        out[a].p[b] = num / denom;
      }
    }
  }
  return out;
}

// Anchor forecasts are split down their subtrees and summed up above the
// anchor level. anchor_level = 0 degenerates to top-down, anchor_level = k
// to bottom-up.
inline GMatrix g_middle_out(const Hierarchy& h, int anchor_level,
                            const std::vector<ProportionVector>& p_below) {
  if (anchor_level < 0 || anchor_level > h.depth())
    throw Error(errc::invalid_level,
                "anchor level " + std::to_string(anchor_level) + " outside 0.." +
                    std::to_string(h.depth()));
  const std::size_t offset = h.level_offset(anchor_level);
  const std::size_t count = h.level_counts()[static_cast<std::size_t>(anchor_level)];
  if (p_below.size() != count)
    throw Error(errc::dimension_mismatch, "need one proportion vector per anchor node");
  GMatrix out{Matrix(h.bottom_count(), h.m()), "mo-l" + std::to_string(anchor_level)};
  for (std::size_t a = 0; a < count; ++a) {
    const int anchor = static_cast<int>(offset + a);
    const auto bottoms = h.bottom_descendants(anchor);
    if (p_below[a].p.size() != bottoms.size())
      throw Error(errc::dimension_mismatch,
                  "anchor '" + h.nodes()[static_cast<std::size_t>(anchor)].id + "' has " +
                      std::to_string(bottoms.size()) + " bottom series, got " +
                      std::to_string(p_below[a].p.size()) + " proportions");
    for (std::size_t b = 0; b < bottoms.size(); ++b)
      out.g(static_cast<std::size_t>(bottoms[b]), static_cast<std::size_t>(anchor)) =
          p_below[a].p[b];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Minimum-trace combination
// ---------------------------------------------------------------------------

// G = (S' W^+ S)^{-1} S' W^+, the trace-minimizing combiner among those with
// G S = I. W^+ is the eigendecomposition pseudo-inverse with relative
// eigenvalue cutoff 1e-10.
inline GMatrix mint_g(const SummingMatrix& s, const CovarianceEstimate& w) {
  const std::size_t m = s.rows();
  const std::size_t mk = s.cols();
  if (w.W.rows() != m || w.W.cols() != m)
    throw Error(errc::dimension_mismatch, "W is " + std::to_string(w.W.rows()) + "x" +
                                              std::to_string(w.W.cols()) + ", expected " +
                                              std::to_string(m) + "x" + std::to_string(m));
  const Matrix w_pinv = linalg::sym_pseudo_inverse(w.W, 1e-10);

  using linalg::EMat;
  const EMat se = linalg::map(s.entries);
  const EMat wp = linalg::map(w_pinv);
  const EMat stw = se.transpose() * wp;  // m_k x m
  const EMat gram = stw * se;            // m_k x m_k, symmetric PSD

  Eigen::SelfAdjointEigenSolver<EMat> eig(0.5 * (gram + gram.transpose()));
  const auto& values = eig.eigenvalues();
  const double vmax = values.cwiseAbs().maxCoeff();
  if (!(vmax > 0.0) || values.minCoeff() <= 1e-10 * vmax)
    throw Error(errc::singular_gram, "S' W^+ S is rank-deficient; try the ols estimator");

  Eigen::VectorXd inv(static_cast<Eigen::Index>(mk));
  for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = 1.0 / values[i];
  const EMat gram_inv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  const EMat g = gram_inv * stw;

  GMatrix out{linalg::from_eigen(g), std::string("mint-") + w_kind_name(w.kind)};

  // G S = I is the unbiasedness condition; if the pseudo-inverse collapsed
  // too much of W the formula can silently lose it, so verify.
  const EMat gs = g * se;
  const double err = (gs - EMat::Identity(static_cast<Eigen::Index>(mk),
                                          static_cast<Eigen::Index>(mk))).cwiseAbs().maxCoeff();
  if (err > 1e-8)
    throw Error(errc::singular_gram,
                "G*S deviates from identity by " + std::to_string(err));
  return out;
}

// ---------------------------------------------------------------------------
// Applying a combiner
// ---------------------------------------------------------------------------

// Reconciled forecasts S * G * base, per horizon step.
inline ForecastPanel reconcile(const SummingMatrix& s, const GMatrix& g, const ForecastPanel& base) {
  const std::size_t m = s.rows();
  if (base.m() != m)
    throw Error(errc::dimension_mismatch, "base panel has " + std::to_string(base.m()) +
                                              " series, hierarchy has " + std::to_string(m));
  if (g.g.rows() != s.cols() || g.g.cols() != m)
    throw Error(errc::dimension_mismatch, "G is " + std::to_string(g.g.rows()) + "x" +
                                              std::to_string(g.g.cols()));
  ForecastPanel out;
  out.node_ids = base.node_ids;
  out.origin = base.origin;
  out.fallback = base.fallback;
  out.values = Matrix(m, base.horizon());
  std::vector<double> column(m);
  for (std::size_t t = 0; t < base.horizon(); ++t) {
    for (std::size_t i = 0; i < m; ++i) column[i] = base.values(i, t);
    const std::vector<double> bottom = matvec(g.g, column);
    const std::vector<double> full = matvec(s.entries, bottom);
    for (std::size_t i = 0; i < m; ++i) out.values(i, t) = full[i];
  }
  return out;
}

// Top-down with forecasted proportions; the proportions differ per step, so
// the G matrix is rebuilt for each horizon step.
inline ForecastPanel reconcile_td_forecasted(const Hierarchy& h, const SummingMatrix& s,
                                             const ForecastPanel& base) {
  ForecastPanel out;
  out.node_ids = base.node_ids;
  out.origin = base.origin;
  out.fallback = base.fallback;
  out.values = Matrix(base.m(), base.horizon());
  std::vector<double> column(base.m());
  for (std::size_t t = 0; t < base.horizon(); ++t) {
    // Historical panel unused by the forecasted scheme; pass a dummy.
    static const SeriesPanel empty_panel{};
    const ProportionVector p =
        td_proportions(empty_panel, h, TdScheme::forecasted, &base, static_cast<int>(t) + 1);
    const GMatrix g = g_top_down(h, p);
    for (std::size_t i = 0; i < base.m(); ++i) column[i] = base.values(i, t);
    const std::vector<double> bottom = matvec(g.g, column);
    const std::vector<double> full = matvec(s.entries, bottom);
    for (std::size_t i = 0; i < base.m(); ++i) out.values(i, t) = full[i];
  }
  return out;
}

// Trace of S G W G' S', the reconciled one-step error covariance under W.
// Diagnostic; MinT minimizes it over all G with G S = I.
inline double trace_vh(const SummingMatrix& s, const GMatrix& g, const Matrix& w) {
  const std::size_t m = s.rows();
  if (g.g.rows() != s.cols() || g.g.cols() != m || w.rows() != m || w.cols() != m)
    throw Error(errc::dimension_mismatch, "trace_vh: shape mismatch");
  const Matrix sg = matmul(s.entries, g.g);  // m x m
  const Matrix sgw = matmul(sg, w);          // m x m
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += sgw(i, j) * sg(i, j);
    trace += acc;
  }
  return trace;
}

}  // namespace hfr
