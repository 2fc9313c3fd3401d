#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hfr/covariance.hpp"
#include "hfr/csv.hpp"
#include "hfr/error.hpp"
#include "hfr/forecast.hpp"
#include "hfr/hierarchy.hpp"
#include "hfr/metrics.hpp"
#include "hfr/ml_reconcile.hpp"
#include "hfr/parallel.hpp"
#include "hfr/reconcile.hpp"
#include "hfr/series.hpp"

namespace hfr {

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

struct Method {
  enum class Family { base, bu, td, mo, mint, ml };
  Family family = Family::bu;
  TdScheme td_scheme = TdScheme::avg_hist;
  int anchor_level = 1;  // middle-out
  WKind w_kind = WKind::ols;
  EnsembleKind ml_kind = EnsembleKind::random_forest;

  std::string name() const {
    switch (family) {
      case Family::base: return "base";
      case Family::bu: return "bu";
      case Family::td: return std::string("td-") + td_scheme_name(td_scheme);
      case Family::mo: return "mo";
      case Family::mint: return std::string("mint-") + w_kind_name(w_kind);
      case Family::ml:
        return ml_kind == EnsembleKind::random_forest ? "ml-rf" : "ml-gbt";
    }
    return "?";
  }

  bool needs_residuals() const {
    return family == Family::mint && (w_kind == WKind::wls || w_kind == WKind::shrinkage);
  }
  bool is_ml() const { return family == Family::ml; }
};

inline Method parse_method(std::string_view name) {
  Method m;
  if (name == "base") { m.family = Method::Family::base; return m; }
  if (name == "bu") { m.family = Method::Family::bu; return m; }
  if (name == "td" || name == "td-td1") {
    m.family = Method::Family::td;
    m.td_scheme = TdScheme::avg_hist;
    return m;
  }
  if (name == "td-td2") {
    m.family = Method::Family::td;
    m.td_scheme = TdScheme::hist_avg;
    return m;
  }
  if (name == "td-fp") {
    m.family = Method::Family::td;
    m.td_scheme = TdScheme::forecasted;
    return m;
  }
  if (name == "mo") { m.family = Method::Family::mo; return m; }
  if (name == "mint-ols") { m.family = Method::Family::mint; m.w_kind = WKind::ols; return m; }
  if (name == "mint-wls") { m.family = Method::Family::mint; m.w_kind = WKind::wls; return m; }
  if (name == "mint-structural") {
    m.family = Method::Family::mint;
    m.w_kind = WKind::structural;
    return m;
  }
  if (name == "mint-shrinkage") {
    m.family = Method::Family::mint;
    m.w_kind = WKind::shrinkage;
    return m;
  }
  if (name == "ml-rf") { m.family = Method::Family::ml; m.ml_kind = EnsembleKind::random_forest; return m; }
  if (name == "ml-gbt") { m.family = Method::Family::ml; m.ml_kind = EnsembleKind::gradient_boosted; return m; }
  throw ConfigError(errc::unknown_method, "'" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Rolling-origin protocol
// ---------------------------------------------------------------------------

struct EvalConfig {
  long initial_train = 0;   // N
  int horizon = 1;          // h
  int origins = 1;          // K
  int seasonal_period = 1;  // s
  long p_start = 0;         // warm-up origin feeding residuals and ML tables
  int refit_every = 1;      // refit ML models every j-th origin

  // Feasibility: origins N .. N+K-1 each need h test observations, i.e.
  // N + h + K - 1 <= n.
  void validate(std::size_t n) const {
    if (initial_train < 1 || horizon < 1 || origins < 1 || seasonal_period < 1 || refit_every < 1)
      throw ConfigError(errc::config_infeasible, "N, h, K, s, refit_every must be positive");
    const long need = initial_train + horizon + origins - 1;
    if (need > static_cast<long>(n))
      throw ConfigError(errc::config_infeasible,
                        "N + h + K - 1 = " + std::to_string(initial_train) + " + " +
                            std::to_string(horizon) + " + " + std::to_string(origins) +
                            " - 1 = " + std::to_string(need) + " exceeds n = " + std::to_string(n));
    if (p_start < 1 || p_start >= initial_train)
      throw ConfigError(errc::config_infeasible,
                        "p_start = " + std::to_string(p_start) + " must satisfy 1 <= p_start < N = " +
                            std::to_string(initial_train));
  }
};

// Largest K satisfying N + h + K - 1 <= n.
inline int max_feasible_origins(std::size_t n, long initial_train, int horizon) {
  return static_cast<int>(static_cast<long>(n) - initial_train - horizon + 1);
}

inline constexpr std::array<const char*, 3> metric_names = {"mase", "rmsse", "amse"};

struct EvalReport {
  std::vector<std::string> methods;  // declaration order
  int levels = 0;                    // k + 1

  // mean over origins, indexed [method][metric][level]; NaN when no origin
  // produced a value
  std::vector<std::array<std::vector<double>, 3>> level_scores;
  // cross-level average, levels weighted equally, indexed [method][metric]
  std::vector<std::array<double, 3>> averages;

  // metadata
  EvalConfig config;
  std::uint64_t seed = 0;
  int workers = 1;
  std::size_t n = 0;
  std::vector<std::size_t> exclusions_per_level;  // zero-denominator (origin, series) pairs
  std::size_t base_fallbacks = 0;                 // rank-deficient AR fits observed
  struct Failure {
    std::string method;
    long origin;
    std::string message;
  };
  std::vector<Failure> failures;
  std::vector<std::pair<std::string, HyperParams>> ml_hyperparams;  // method -> params used

  struct OriginRow {
    long origin;
    int method;
    int metric;
    int level;
    double value;
  };
  std::vector<OriginRow> per_origin;
};

namespace detail {

inline SeriesPanel truncate_panel(const SeriesPanel& panel, long n) {
  SeriesPanel out;
  out.node_ids = panel.node_ids;
  out.seasonal_period = panel.seasonal_period;
  out.regressors = panel.regressors;
  out.values = Matrix(panel.m(), static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < panel.m(); ++i)
    for (std::size_t t = 0; t < static_cast<std::size_t>(n); ++t)
      out.values(i, t) = panel.values(i, t);
  return out;
}

}  // namespace detail

// True when the seasonal-naive denominator of the metrics vanishes.
inline bool metrics_denominator_zero(std::span<const double> insample, int s) {
  if (insample.size() <= static_cast<std::size_t>(s)) return true;
  return detail::seasonal_abs_sum(insample, s) == 0.0;
}

// Rolling-origin evaluation: for each origin o = N .. N+K-1, base models are
// fitted on the first o observations, every method reconciles the h-step
// base forecasts, and each series is scored with all three metrics against
// the training window available at that origin. Scores are averaged per
// level over origins, then across levels with equal weights.
inline EvalReport rolling_origin_evaluate(const SeriesPanel& panel, const Hierarchy& h,
                                          const std::vector<Method>& methods,
                                          const EvalConfig& cfg,
                                          const std::vector<BaseModelSpec>& specs,
                                          const MlConfig& ml_cfg, std::uint64_t seed,
                                          int workers = 1) {
  cfg.validate(panel.n());
  if (methods.empty()) throw ConfigError(errc::bad_config, "no methods requested");
  const SummingMatrix s = summing_matrix(h);
  validate_panel(panel, h, s);
  for (const auto& method : methods)
    if (method.family == Method::Family::mo &&
        (method.anchor_level < 0 || method.anchor_level > h.depth()))
      throw ConfigError(errc::invalid_level,
                        "middle-out anchor level " + std::to_string(method.anchor_level));

  const std::size_t m = h.m();
  const int levels = h.depth() + 1;
  const int n_methods = static_cast<int>(methods.size());
  const long first_origin = cfg.initial_train;
  const int K = cfg.origins;

  const bool need_records =
      std::any_of(methods.begin(), methods.end(),
                  [](const Method& mm) { return mm.needs_residuals() || mm.is_ml(); });

  // Rolling one-step records are independent of the evaluation origin, so
  // they are produced once for every p in [p_start, N+K-2] and sliced.
  std::vector<RollingOneStepRecord> records;
  if (need_records)
    records = rolling_one_step(specs, panel, h, cfg.p_start, first_origin + K - 2, workers);

  // ML hyperparameters are resolved once, on the tables available at the
  // first origin; models are refitted per origin (or per refit_every group).
  std::vector<std::pair<std::string, HyperParams>> resolved_hp;
  MlConfig ml_resolved = ml_cfg;
  const bool any_ml = std::any_of(methods.begin(), methods.end(),
                                  [](const Method& mm) { return mm.is_ml(); });
  if (any_ml && ml_cfg.tune) {
    std::vector<RollingOneStepRecord> first_slice;
    for (const auto& rec : records)
      if (rec.origin < first_origin) first_slice.push_back(rec);
    std::vector<TrainingTable> tables;
    for (std::size_t j = 0; j < h.bottom_count(); ++j)
      tables.push_back(build_training_table(first_slice, j));
    for (const auto& method : methods)
      if (method.is_ml()) {
        MlConfig probe = ml_cfg;
        probe.kind = method.ml_kind;
        const HyperParams hp = tune_hyperparameters(
            std::span<const TrainingTable>(tables.data(), tables.size()), probe.kind,
            probe.budget, probe.folds, Rng::mix(seed, 0x74756e65), probe.ranges, workers);
        resolved_hp.emplace_back(method.name(), hp);
      }
    ml_resolved.tune = false;  // models below reuse the resolved parameters
  } else if (any_ml) {
    for (const auto& method : methods)
      if (method.is_ml()) resolved_hp.emplace_back(method.name(), ml_cfg.fixed);
  }
  auto hp_for = [&](const Method& method) -> const HyperParams& {
    for (const auto& [name, hp] : resolved_hp)
      if (name == method.name()) return hp;
    return ml_resolved.fixed;
  };

  struct OriginOutcome {
    // value[method][metric][level], NaN when missing
    std::vector<std::array<std::vector<double>, 3>> value;
    std::vector<std::string> failure;  // per method, empty = ok
    std::vector<std::size_t> excluded_per_level;
    std::size_t fallbacks = 0;
  };
  std::vector<OriginOutcome> outcomes(static_cast<std::size_t>(K));

  const int groups = (K + cfg.refit_every - 1) / cfg.refit_every;
  parallel_for(static_cast<std::size_t>(groups), workers, [&](std::size_t gi) {
    const int g_begin = static_cast<int>(gi) * cfg.refit_every;
    const int g_end = std::min(K, g_begin + cfg.refit_every);

    // Per-group ML models, fitted at the group's first origin. A failed fit
    // flags the method for the group's origins instead of aborting the run.
    struct GroupFit {
      std::string method;
      std::vector<EnsembleModel> models;
      std::string error;
    };
    std::vector<GroupFit> group_models;
    const long fit_origin = first_origin + g_begin;
    for (const auto& method : methods) {
      if (!method.is_ml()) continue;
      GroupFit fit{method.name(), {}, {}};
      try {
        std::vector<RollingOneStepRecord> slice;
        for (const auto& rec : records)
          if (rec.origin < fit_origin) slice.push_back(rec);
        std::vector<TrainingTable> tables;
        for (std::size_t j = 0; j < h.bottom_count(); ++j)
          tables.push_back(build_training_table(slice, j));
        MlConfig one = ml_resolved;
        one.kind = method.ml_kind;
        one.fixed = hp_for(method);
        fit.models =
            fit_ml_models(tables, one, Rng::mix(seed, static_cast<std::uint64_t>(fit_origin)), 1);
      } catch (const Error& e) {
        fit.error = e.what();
      }
      group_models.push_back(std::move(fit));
    }

    for (int oi = g_begin; oi < g_end; ++oi) {
      const long origin = first_origin + oi;
      OriginOutcome& out = outcomes[static_cast<std::size_t>(oi)];
      out.value.assign(static_cast<std::size_t>(n_methods), {});
      for (auto& per_metric : out.value)
        for (auto& v : per_metric)
          v.assign(static_cast<std::size_t>(levels), std::numeric_limits<double>::quiet_NaN());
      out.failure.assign(static_cast<std::size_t>(n_methods), "");
      out.excluded_per_level.assign(static_cast<std::size_t>(levels), 0);

      ForecastPanel base;
      try {
        base = base_forecast_panel(specs, panel, h, origin, cfg.horizon, 1);
      } catch (const Error& e) {
        // no base forecasts: every method fails at this origin
        out.failure.assign(static_cast<std::size_t>(n_methods),
                           std::string("base forecast failed: ") + e.what());
        continue;
      }
      for (auto f : base.fallback) out.fallbacks += f;

      const SeriesPanel window = detail::truncate_panel(panel, origin);

      // Per-series exclusion under the training window at this origin.
      std::vector<std::uint8_t> excluded(m, 0);
      for (std::size_t x = 0; x < m; ++x) {
        const auto insample = panel.row(x).subspan(0, static_cast<std::size_t>(origin));
        if (metrics_denominator_zero(insample, cfg.seasonal_period)) {
          excluded[x] = 1;
          ++out.excluded_per_level[static_cast<std::size_t>(h.nodes()[x].level)];
        }
      }

      for (int mi = 0; mi < n_methods; ++mi) {
        const Method& method = methods[static_cast<std::size_t>(mi)];
        ForecastPanel reconciled;
        try {
          switch (method.family) {
            case Method::Family::base:
              reconciled = base;
              break;
            case Method::Family::bu:
              reconciled = reconcile(s, g_bottom_up(h), base);
              break;
            case Method::Family::td: {
              if (method.td_scheme == TdScheme::forecasted) {
                reconciled = reconcile_td_forecasted(h, s, base);
              } else {
                const ProportionVector p = td_proportions(window, h, method.td_scheme);
                reconciled = reconcile(s, g_top_down(h, p), base);
              }
              break;
            }
            case Method::Family::mo: {
              const auto p =
                  subtree_proportions(window, h, method.anchor_level, TdScheme::avg_hist);
              reconciled = reconcile(s, g_middle_out(h, method.anchor_level, p), base);
              break;
            }
            case Method::Family::mint: {
              Matrix residuals;
              const Matrix* rptr = nullptr;
              if (method.needs_residuals()) {
                residuals = one_step_residual_matrix(records, panel, origin);
                rptr = &residuals;
              }
              reconciled = reconcile(s, mint_g(s, estimate_w(method.w_kind, h, rptr)), base);
              break;
            }
            case Method::Family::ml: {
              const GroupFit* fit = nullptr;
              for (const auto& gf : group_models)
                if (gf.method == method.name()) fit = &gf;
              if (!fit->error.empty()) throw Error(errc::empty_records, fit->error);
              reconciled = ml_reconcile_forecast(fit->models, base, s);
              break;
            }
          }
        } catch (const Error& e) {
          out.failure[static_cast<std::size_t>(mi)] = e.what();
          continue;
        }

        for (int metric = 0; metric < 3; ++metric) {
          for (int level = 0; level < levels; ++level) {
            const std::size_t off = h.level_offset(level);
            const std::size_t cnt = h.level_counts()[static_cast<std::size_t>(level)];
            double acc = 0.0;
            std::size_t used = 0;
            for (std::size_t x = off; x < off + cnt; ++x) {
              if (excluded[x]) continue;
              const auto insample = panel.row(x).subspan(0, static_cast<std::size_t>(origin));
              const auto actual = panel.row(x).subspan(static_cast<std::size_t>(origin),
                                                       static_cast<std::size_t>(cfg.horizon));
              const auto forecast = reconciled.values.row(x);
              const double score =
                  metric == 0 ? mase(actual, forecast, insample, cfg.seasonal_period)
                  : metric == 1 ? rmsse(actual, forecast, insample, cfg.seasonal_period)
                                : amse(actual, forecast, insample, cfg.seasonal_period);
              acc += score;
              ++used;
            }
            if (used > 0)
              out.value[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)]
                       [static_cast<std::size_t>(level)] = acc / static_cast<double>(used);
          }
        }
      }
    }
  });

  // Deterministic reduction in origin order.
  EvalReport report;
  report.config = cfg;
  report.seed = seed;
  report.workers = workers;
  report.n = panel.n();
  report.levels = levels;
  report.ml_hyperparams = resolved_hp;
  for (const auto& method : methods) report.methods.push_back(method.name());
  report.level_scores.assign(static_cast<std::size_t>(n_methods), {});
  report.averages.assign(static_cast<std::size_t>(n_methods), {});
  report.exclusions_per_level.assign(static_cast<std::size_t>(levels), 0);

  std::vector<std::array<std::vector<double>, 3>> sums(static_cast<std::size_t>(n_methods));
  std::vector<std::array<std::vector<std::size_t>, 3>> counts(static_cast<std::size_t>(n_methods));
  for (int mi = 0; mi < n_methods; ++mi)
    for (int metric = 0; metric < 3; ++metric) {
      sums[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)].assign(
          static_cast<std::size_t>(levels), 0.0);
      counts[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)].assign(
          static_cast<std::size_t>(levels), 0);
    }

  for (int oi = 0; oi < K; ++oi) {
    const OriginOutcome& out = outcomes[static_cast<std::size_t>(oi)];
    const long origin = first_origin + oi;
    report.base_fallbacks += out.fallbacks;
    for (int level = 0; level < levels; ++level)
      report.exclusions_per_level[static_cast<std::size_t>(level)] +=
          out.excluded_per_level[static_cast<std::size_t>(level)];
    for (int mi = 0; mi < n_methods; ++mi) {
      if (!out.failure[static_cast<std::size_t>(mi)].empty()) {
        report.failures.push_back(
            {methods[static_cast<std::size_t>(mi)].name(), origin,
             out.failure[static_cast<std::size_t>(mi)]});
        continue;
      }
      for (int metric = 0; metric < 3; ++metric)
        for (int level = 0; level < levels; ++level) {
          const double v = out.value[static_cast<std::size_t>(mi)][static_cast<std::size_t>(
              metric)][static_cast<std::size_t>(level)];
          if (std::isnan(v)) continue;
          sums[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)]
              [static_cast<std::size_t>(level)] += v;
          counts[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)]
                [static_cast<std::size_t>(level)] += 1;
          report.per_origin.push_back({origin, mi, metric, level, v});
        }
    }
  }

  for (int mi = 0; mi < n_methods; ++mi)
    for (int metric = 0; metric < 3; ++metric) {
      auto& dest =
          report.level_scores[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)];
      dest.assign(static_cast<std::size_t>(levels), std::numeric_limits<double>::quiet_NaN());
      double level_acc = 0.0;
      for (int level = 0; level < levels; ++level) {
        const auto c = counts[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)]
                             [static_cast<std::size_t>(level)];
        if (c > 0)
          dest[static_cast<std::size_t>(level)] =
              sums[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)]
                  [static_cast<std::size_t>(level)] /
              static_cast<double>(c);
        level_acc += dest[static_cast<std::size_t>(level)];
      }
      report.averages[static_cast<std::size_t>(mi)][static_cast<std::size_t>(metric)] =
          level_acc / static_cast<double>(levels);
    }
  return report;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

// CSV rows ordered (metric, method, level), all by declaration order, with
// full-precision values.
inline std::string report_csv(const EvalReport& report) {
  std::string out = "method,level,metric,value\n";
  for (int metric = 0; metric < 3; ++metric)
    for (std::size_t mi = 0; mi < report.methods.size(); ++mi)
      for (int level = 0; level < report.levels; ++level) {
        out += report.methods[mi];
        out += ',';
        out += std::to_string(level);
        out += ',';
        out += metric_names[static_cast<std::size_t>(metric)];
        out += ',';
        out += format_double(
            report.level_scores[mi][static_cast<std::size_t>(metric)][static_cast<std::size_t>(level)]);
        out += '\n';
      }
  return out;
}

inline void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  atomic_write_file(path, report_csv(report));
}

// Plain-text table in the usual layout: one block per metric, levels as
// columns plus the equal-weight average.
inline std::string render_table(const EvalReport& report) {
  std::size_t name_width = 8;
  for (const auto& m : report.methods) name_width = std::max(name_width, m.size() + 2);
  auto cell = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%10.4f", v);
    return std::string(buf);
  };
  std::string out;
  for (int metric = 0; metric < 3; ++metric) {
    out += "== ";
    out += metric_names[static_cast<std::size_t>(metric)];
    out += " ==\n";
    out += "method";
    out.append(name_width - 6, ' ');
    for (int level = 0; level < report.levels; ++level) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%10s", ("level" + std::to_string(level)).c_str());
      out += buf;
    }
    out += "   average\n";
    for (std::size_t mi = 0; mi < report.methods.size(); ++mi) {
      out += report.methods[mi];
      out.append(name_width - report.methods[mi].size(), ' ');
      for (int level = 0; level < report.levels; ++level)
        out += cell(report.level_scores[mi][static_cast<std::size_t>(metric)]
                                       [static_cast<std::size_t>(level)]);
      out += cell(report.averages[mi][static_cast<std::size_t>(metric)]);
      out += '\n';
    }
    if (metric < 2) out += '\n';
  }
  return out;
}

// Per-origin score dump: origin,method,metric,level,value.
inline std::string per_origin_csv(const EvalReport& report) {
  std::string out = "origin,method,metric,level,value\n";
  for (const auto& row : report.per_origin) {
    out += std::to_string(row.origin);
    out += ',';
    out += report.methods[static_cast<std::size_t>(row.method)];
    out += ',';
    out += metric_names[static_cast<std::size_t>(row.metric)];
    out += ',';
    out += std::to_string(row.level);
    out += ',';
    out += format_double(row.value);
    out += '\n';
  }
  return out;
}

inline void write_per_origin_csv(const EvalReport& report, const std::filesystem::path& path) {
  atomic_write_file(path, per_origin_csv(report));
}

}  // namespace hfr
