#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hfr/error.hpp"
#include "hfr/hierarchy.hpp"
#include "hfr/linalg.hpp"
#include "hfr/parallel.hpp"
#include "hfr/series.hpp"

namespace hfr {

// Base or reconciled forecasts for every node, one column per step.
struct ForecastPanel {
  std::vector<std::string> node_ids;
  Matrix values;  // m x h
  long origin = 0;  // last in-sample period (1-based count of observations used)
  // Set where a least-squares fit was rank-deficient and the series fell
  // back to seasonal naive.
  std::vector<std::uint8_t> fallback;

  std::size_t m() const { return values.rows(); }
  std::size_t horizon() const { return values.cols(); }
};

struct BaseModelSpec {
  enum class Kind { seasonal_naive, ar_ls, ar_ls_exog };
  Kind kind = Kind::seasonal_naive;
  int order = 0;  // q, autoregressive lags
  bool intercept = true;
  bool seasonal_dummies = false;
  std::string regressor_id;

  static BaseModelSpec seasonal_naive() { return BaseModelSpec{}; }
  static BaseModelSpec ar(int q, bool with_intercept = true, bool with_dummies = false) {
    BaseModelSpec spec;
    spec.kind = Kind::ar_ls;
    spec.order = q;
    spec.intercept = with_intercept;
    spec.seasonal_dummies = with_dummies;
    return spec;
  }
  static BaseModelSpec ar_exog(int q, std::string regressor, bool with_intercept = true,
                               bool with_dummies = false) {
    BaseModelSpec spec = ar(q, with_intercept, with_dummies);
    spec.kind = Kind::ar_ls_exog;
    spec.regressor_id = std::move(regressor);
    return spec;
  }
};

struct BaseForecast {
  std::vector<double> values;
  bool fallback = false;
};

namespace detail {

inline std::vector<double> seasonal_naive_forecast(std::span<const double> history, int s, int h) {
  std::vector<double> out(static_cast<std::size_t>(h));
  const std::size_t n = history.size();
  for (int j = 1; j <= h; ++j) {
    // Last observation from the same season: repeats the final cycle.
    const int back = ((j - 1) % s) + 1;
    out[static_cast<std::size_t>(j - 1)] = history[n - static_cast<std::size_t>(s) +
                                                   static_cast<std::size_t>(back) - 1];
  }
  return out;
}

// Feature row for the AR design at (1-based) time t. Layout:
// [lag_1..lag_q, intercept?, dummies..., regressor?].
inline void ar_features(std::span<const double> series, long t, const BaseModelSpec& spec, int s,
                        std::span<const double> regressor, std::vector<double>& row) {
  row.clear();
  for (int lag = 1; lag <= spec.order; ++lag)
    row.push_back(series[static_cast<std::size_t>(t - lag) - 1]);
  if (spec.intercept) row.push_back(1.0);
  if (spec.seasonal_dummies && s > 1) {
    const int dummies = spec.intercept ? s - 1 : s;
    const long season = (t - 1) % s;
    for (int d = 0; d < dummies; ++d) row.push_back(season == d ? 1.0 : 0.0);
  }
  if (spec.kind == BaseModelSpec::Kind::ar_ls_exog)
    row.push_back(regressor[static_cast<std::size_t>(t) - 1]);
}

}  // namespace detail

// Fits one base model on history (observations 1..origin) and produces h
// forecasts. AR models solve least squares on lagged values and iterate
// recursively for multi-step; a rank-deficient design falls back to
// seasonal naive with the fallback flag set.
inline BaseForecast fit_forecast(const BaseModelSpec& spec, std::span<const double> history, int s,
                                 int h, std::span<const double> regressor = {}) {
  if (s < 1) throw Error(errc::bad_format, "seasonal period must be >= 1");
  if (h < 1) throw Error(errc::bad_format, "horizon must be >= 1");
  const long origin = static_cast<long>(history.size());
  const long min_history = std::max<long>(2 * s, spec.order + 2);
  if (origin < min_history)
    throw Error(errc::insufficient_history, "need at least " + std::to_string(min_history) +
                                                " observations, have " + std::to_string(origin));

  if (spec.kind == BaseModelSpec::Kind::seasonal_naive)
    return {detail::seasonal_naive_forecast(history, s, h), false};

  if (spec.kind == BaseModelSpec::Kind::ar_ls_exog) {
    if (regressor.size() < static_cast<std::size_t>(origin + h))
      throw DataError(errc::missing_regressor,
                      "regressor '" + spec.regressor_id + "' must cover " +
                          std::to_string(origin + h) + " periods, has " +
                          std::to_string(regressor.size()));
  }

  const long q = spec.order;
  std::vector<double> feature_row;
  detail::ar_features(history, q + 1, spec, s, regressor, feature_row);
  const std::size_t n_features = feature_row.size();
  const std::size_t n_rows = static_cast<std::size_t>(origin - q);

  Matrix design(n_rows, n_features);
  std::vector<double> target(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const long t = q + 1 + static_cast<long>(r);
    detail::ar_features(history, t, spec, s, regressor, feature_row);
    for (std::size_t c = 0; c < n_features; ++c) design(r, c) = feature_row[c];
    target[r] = history[static_cast<std::size_t>(t) - 1];
  }

  auto beta = linalg::solve_least_squares(design, target);
  if (!beta) return {detail::seasonal_naive_forecast(history, s, h), true};

  // Recursive multi-step: forecasts feed back in as lagged values.
  std::vector<double> extended(history.begin(), history.end());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(h));
  for (int j = 1; j <= h; ++j) {
    const long t = origin + j;
    detail::ar_features(extended, t, spec, s, regressor, feature_row);
    double value = 0.0;
    for (std::size_t c = 0; c < n_features; ++c) value += (*beta)[c] * feature_row[c];
    if (!std::isfinite(value))
      throw Error(errc::bad_format, "non-finite forecast at step " + std::to_string(j));
    extended.push_back(value);
    out.push_back(value);
  }
  return {std::move(out), false};
}

// One-step-ahead forecasts of every series made from origin p, plus the
// observed bottom values at p+1. These rows are what the ML combiners
// train on.
struct RollingOneStepRecord {
  long origin = 0;       // p
  long target_time = 0;  // p + 1
  std::vector<double> forecasts;      // length m; NaN where the fit failed
  std::vector<double> actual_bottom;  // length m_k
  bool fit_failed = false;
  std::vector<std::uint8_t> fallback;  // per node
};

// One record per origin p in [p_start, origin_end]. The record at p uses
// only observations 1..p. Fit errors flag the record instead of dropping
// it so downstream tables stay aligned.
inline std::vector<RollingOneStepRecord> rolling_one_step(const std::vector<BaseModelSpec>& specs,
                                                          const SeriesPanel& panel,
                                                          const Hierarchy& h, long p_start,
                                                          long origin_end, int workers = 1) {
  const std::size_t m = h.m();
  const std::size_t mk = h.bottom_count();
  if (specs.size() != m)
    throw Error(errc::dimension_mismatch,
                "need one spec per node: " + std::to_string(specs.size()) + " vs " + std::to_string(m));
  if (origin_end >= static_cast<long>(panel.n()))
    throw Error(errc::insufficient_history,
                "origin_end " + std::to_string(origin_end) + " leaves no observation at " +
                    std::to_string(origin_end + 1));
  if (p_start > origin_end)
    throw Error(errc::bad_format, "p_start > origin_end");

  const std::size_t count = static_cast<std::size_t>(origin_end - p_start + 1);
  std::vector<RollingOneStepRecord> records(count);
  parallel_for(count, workers, [&](std::size_t i) {
    const long p = p_start + static_cast<long>(i);
    RollingOneStepRecord rec;
    rec.origin = p;
    rec.target_time = p + 1;
    rec.forecasts.assign(m, std::numeric_limits<double>::quiet_NaN());
    rec.fallback.assign(m, 0);
    for (std::size_t x = 0; x < m; ++x) {
      const auto history = panel.row(x).subspan(0, static_cast<std::size_t>(p));
      std::span<const double> reg;
      if (specs[x].kind == BaseModelSpec::Kind::ar_ls_exog) {
        auto it = panel.regressors.find(specs[x].regressor_id);
        if (it == panel.regressors.end()) {
          rec.fit_failed = true;
          continue;
        }
        reg = it->second;
      }
      try {
        BaseForecast f = fit_forecast(specs[x], history, panel.seasonal_period, 1, reg);
        rec.forecasts[x] = f.values[0];
        rec.fallback[x] = f.fallback ? 1 : 0;
      } catch (const Error&) {
        rec.fit_failed = true;
      }
    }
    rec.actual_bottom.resize(mk);
    for (std::size_t j = 0; j < mk; ++j)
      rec.actual_bottom[j] =
          panel.values(static_cast<std::size_t>(h.bottom_node(static_cast<int>(j))),
                       static_cast<std::size_t>(p));  // observation at time p+1 (0-based column p)
    records[i] = std::move(rec);
  });
  return records;
}

// One-step in-sample residual matrix (m x T): observed minus forecast for
// every usable record with origin < before_origin. This is the residual
// source for the wls and shrinkage covariance estimators.
inline Matrix one_step_residual_matrix(std::span<const RollingOneStepRecord> records,
                                       const SeriesPanel& panel, long before_origin) {
  std::size_t t_count = 0;
  for (const auto& rec : records)
    if (!rec.fit_failed && rec.origin < before_origin) ++t_count;
  if (t_count < 3)
    throw Error(errc::missing_residuals,
                "only " + std::to_string(t_count) + " usable one-step residuals before origin " +
                    std::to_string(before_origin));
  Matrix e(panel.m(), t_count);
  std::size_t col = 0;
  for (const auto& rec : records) {
    if (rec.fit_failed || rec.origin >= before_origin) continue;
    for (std::size_t x = 0; x < panel.m(); ++x)
      e(x, col) = panel.values(x, static_cast<std::size_t>(rec.target_time) - 1) - rec.forecasts[x];
    ++col;
  }
  return e;
}

// Fits the per-node specs on the first `origin` observations and stacks
// h-step forecasts into a panel.
inline ForecastPanel base_forecast_panel(const std::vector<BaseModelSpec>& specs,
                                         const SeriesPanel& panel, const Hierarchy& h, long origin,
                                         int horizon, int workers = 1) {
  const std::size_t m = h.m();
  if (specs.size() != m)
    throw Error(errc::dimension_mismatch, "need one spec per node");
  if (origin < 1 || origin > static_cast<long>(panel.n()))
    throw Error(errc::insufficient_history, "origin " + std::to_string(origin) + " out of range");
  ForecastPanel out;
  out.node_ids = panel.node_ids;
  out.values = Matrix(m, static_cast<std::size_t>(horizon));
  out.origin = origin;
  out.fallback.assign(m, 0);
  parallel_for(m, workers, [&](std::size_t x) {
    const auto history = panel.row(x).subspan(0, static_cast<std::size_t>(origin));
    std::span<const double> reg;
    if (specs[x].kind == BaseModelSpec::Kind::ar_ls_exog) {
      auto it = panel.regressors.find(specs[x].regressor_id);
      if (it == panel.regressors.end())
        throw DataError(errc::missing_regressor, "regressor '" + specs[x].regressor_id +
                                                     "' not present in the panel");
      reg = it->second;
    }
    BaseForecast f = fit_forecast(specs[x], history, panel.seasonal_period, horizon, reg);
    for (int j = 0; j < horizon; ++j) out.values(x, static_cast<std::size_t>(j)) = f.values[static_cast<std::size_t>(j)];
    out.fallback[x] = f.fallback ? 1 : 0;
  });
  return out;
}

}  // namespace hfr
