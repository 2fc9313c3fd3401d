#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "hfr/evaluate.hpp"
#include "hfr/io.hpp"
#include "hfr/ml_reconcile.hpp"
#include "hfr/run_config.hpp"
#include "hfr/version.hpp"

namespace hfr {

namespace detail {

inline void require_file(const std::string& path, const std::string& key) {
  if (path.empty()) throw ConfigError(errc::bad_config, "missing required key " + key);
  if (!std::filesystem::exists(path))
    throw ConfigError(errc::bad_config, key + " = " + path + " does not exist");
}

struct LoadedData {
  Hierarchy hierarchy;
  SummingMatrix s;
  SeriesPanel panel;
  std::vector<BaseModelSpec> specs;
};

inline LoadedData load_data(const RunConfig& cfg) {
  require_file(cfg.hierarchy_path, "data.hierarchy");
  require_file(cfg.series_path, "data.series");
  if (!cfg.regressors_path.empty()) require_file(cfg.regressors_path, "data.regressors");
  if (!cfg.external_forecasts_path.empty())
    require_file(cfg.external_forecasts_path, "data.external_forecasts");

  LoadedData data{load_hierarchy_csv(cfg.hierarchy_path), {}, {}, {}};
  data.s = summing_matrix(data.hierarchy);
  data.panel = load_series_csv(cfg.series_path, data.hierarchy, cfg.eval.seasonal_period);
  if (!cfg.regressors_path.empty()) data.panel.regressors = load_regressor_csv(cfg.regressors_path);
  validate_panel(data.panel, data.hierarchy, data.s);
  data.specs = resolve_specs(cfg, data.hierarchy);
  return data;
}

inline std::vector<Method> resolve_methods(const RunConfig& cfg) {
  if (cfg.methods.empty()) throw ConfigError(errc::bad_config, "run.methods is empty");
  std::vector<Method> methods;
  bool any_ml = false;
  for (const auto& name : cfg.methods) {
    Method m = parse_method(name);
    if (m.family == Method::Family::td && name == "td") m.td_scheme = cfg.td_scheme;
    if (m.family == Method::Family::mo) m.anchor_level = cfg.mo_level;
    any_ml = any_ml || m.is_ml();
    methods.push_back(m);
  }
  if (any_ml && !cfg.seed)
    throw ConfigError(errc::bad_config, "run.seed is required when an ML method is listed");
  return methods;
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed_or_default();
  j["workers"] = cfg.workers;
  j["methods"] = cfg.methods;
  j["eval"] = {{"N", cfg.eval.initial_train}, {"h", cfg.eval.horizon},
               {"K", cfg.eval.origins},       {"s", cfg.eval.seasonal_period},
               {"p_start", cfg.eval.p_start}, {"refit_every", cfg.eval.refit_every}};
  j["ml"] = {{"kind", ensemble_kind_name(cfg.ml.kind)},
             {"tune", cfg.ml.tune},
             {"budget", cfg.ml.budget},
             {"folds", cfg.ml.folds},
             {"shared", cfg.ml.shared_tuning}};
  return j;
}

inline nlohmann::json hyperparams_json(const HyperParams& hp) {
  return nlohmann::json{{"ntree", hp.ntree},
                        {"mtry", hp.mtry},
                        {"nodesize", hp.nodesize},
                        {"eta", hp.eta},
                        {"subsample", hp.subsample},
                        {"colsample_bytree", hp.colsample_bytree},
                        {"min_child_weight", hp.min_child_weight},
                        {"max_depth", hp.max_depth},
                        {"gamma", hp.gamma},
                        {"nrounds", hp.nrounds}};
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  atomic_write_file(path, j.dump(2) + "\n");
}

// Rolling one-step records over [p_start, n-1]; the residual source for
// mint-wls / mint-shrinkage outside the evaluation loop.
inline std::vector<RollingOneStepRecord> capture_records(const RunConfig& cfg,
                                                         const LoadedData& data) {
  if (!cfg.capture_residuals)
    throw ConfigError(errc::missing_residuals,
                      "this method needs one-step residuals; set base.capture_residuals = true "
                      "and eval.p_start");
  if (cfg.eval.p_start < 1)
    throw ConfigError(errc::missing_residuals,
                      "rolling residual capture needs eval.p_start >= 1");
  return rolling_one_step(data.specs, data.panel, data.hierarchy, cfg.eval.p_start,
                          static_cast<long>(data.panel.n()) - 1, cfg.workers);
}

}  // namespace detail

// Every column of the panel passes the coherence check at 1e-9.
inline bool coherence_check_panel(const SummingMatrix& s, const ForecastPanel& panel) {
  std::vector<double> column(panel.m());
  for (std::size_t t = 0; t < panel.horizon(); ++t) {
    for (std::size_t i = 0; i < panel.m(); ++i) column[i] = panel.values(i, t);
    if (!coherence_check(s, column, 1e-9)) return false;
  }
  return true;
}

// `forecast`: fit the base models on the full sample and write the h-step
// base forecast panel (plus the rolling one-step records when capture is
// on).
inline void cmd_forecast(const RunConfig& cfg) {
  const auto data = detail::load_data(cfg);
  const auto out = std::filesystem::path(cfg.out_dir);
  std::filesystem::create_directories(out);

  const ForecastPanel base =
      base_forecast_panel(data.specs, data.panel, data.hierarchy,
                          static_cast<long>(data.panel.n()), cfg.eval.horizon, cfg.workers);
  write_forecast_csv(base, out / "base_forecasts.csv");

  nlohmann::json meta;
  meta["version"] = std::string(version_string);
  meta["schema_hash"] = config_schema_hash();
  meta["command"] = "forecast";
  meta["config"] = detail::config_json(cfg);
  meta["n"] = data.panel.n();
  meta["m"] = data.hierarchy.m();
  meta["fallbacks"] = std::count(base.fallback.begin(), base.fallback.end(), std::uint8_t{1});

  if (cfg.capture_residuals) {
    const auto records = detail::capture_records(cfg, data);
    write_records_csv(records, data.hierarchy, out / "rolling_records.csv");
    meta["rolling_records"] = records.size();
  }
  detail::write_json(meta, out / "forecast_meta.json");
}

// `reconcile`: reconcile base forecasts (computed or external) with every
// requested method; one output file per method, failures isolated.
// Returns the names of methods that failed.
inline std::vector<std::string> cmd_reconcile(const RunConfig& cfg, std::ostream& err = std::cerr) {
  const auto data = detail::load_data(cfg);
  const auto methods = detail::resolve_methods(cfg);
  const auto out = std::filesystem::path(cfg.out_dir);
  std::filesystem::create_directories(out);

  const ForecastPanel base =
      cfg.external_forecasts_path.empty()
          ? base_forecast_panel(data.specs, data.panel, data.hierarchy,
                                static_cast<long>(data.panel.n()), cfg.eval.horizon, cfg.workers)
          : load_forecast_csv(cfg.external_forecasts_path, data.hierarchy,
                              static_cast<long>(data.panel.n()));

  std::vector<RollingOneStepRecord> records;
  const bool need_records = std::any_of(methods.begin(), methods.end(), [](const Method& m) {
    return m.needs_residuals() || m.is_ml();
  });
  std::vector<std::string> failed;
  nlohmann::json meta;
  meta["version"] = std::string(version_string);
  meta["schema_hash"] = config_schema_hash();
  meta["command"] = "reconcile";
  meta["config"] = detail::config_json(cfg);
  meta["methods"] = nlohmann::json::object();

  if (need_records) records = detail::capture_records(cfg, data);

  for (const Method& method : methods) {
    const std::string name = method.name();
    nlohmann::json method_meta;
    try {
      ForecastPanel reconciled;
      switch (method.family) {
        case Method::Family::base:
          reconciled = base;
          break;
        case Method::Family::bu: {
          const GMatrix g = g_bottom_up(data.hierarchy);
          if (cfg.audit) write_matrix_csv(g.g, out / ("g_" + name + ".csv"));
          reconciled = reconcile(data.s, g, base);
          break;
        }
        case Method::Family::td: {
          if (method.td_scheme == TdScheme::forecasted) {
            reconciled = reconcile_td_forecasted(data.hierarchy, data.s, base);
          } else {
            const ProportionVector p = td_proportions(data.panel, data.hierarchy, method.td_scheme);
            const GMatrix g = g_top_down(data.hierarchy, p);
            if (cfg.audit) write_matrix_csv(g.g, out / ("g_" + name + ".csv"));
            reconciled = reconcile(data.s, g, base);
          }
          break;
        }
        case Method::Family::mo: {
          const auto p = subtree_proportions(data.panel, data.hierarchy, method.anchor_level,
                                             TdScheme::avg_hist);
          const GMatrix g = g_middle_out(data.hierarchy, method.anchor_level, p);
          if (cfg.audit) write_matrix_csv(g.g, out / ("g_" + name + ".csv"));
          reconciled = reconcile(data.s, g, base);
          break;
        }
        case Method::Family::mint: {
          Matrix residuals;
          const Matrix* rptr = nullptr;
          if (method.needs_residuals()) {
            residuals = one_step_residual_matrix(records, data.panel,
                                                static_cast<long>(data.panel.n()));
            rptr = &residuals;
          }
          const CovarianceEstimate w = estimate_w(method.w_kind, data.hierarchy, rptr);
          if (w.lambda) method_meta["lambda"] = *w.lambda;
          if (!w.degenerate.empty()) method_meta["degenerate_series"] = w.degenerate;
          const GMatrix g = mint_g(data.s, w);
          if (cfg.audit) {
            write_matrix_csv(g.g, out / ("g_" + name + ".csv"));
            write_matrix_csv(w.W, out / ("w_" + name + ".csv"));
          }
          reconciled = reconcile(data.s, g, base);
          break;
        }
        case Method::Family::ml: {
          std::vector<TrainingTable> tables;
          for (std::size_t j = 0; j < data.hierarchy.bottom_count(); ++j)
            tables.push_back(build_training_table(records, j));
          MlConfig ml = cfg.ml;
          ml.kind = method.ml_kind;
          const auto models = fit_ml_models(tables, ml, cfg.seed_or_default(), cfg.workers);
          if (cfg.save_models) {
            const auto dir = out / ("models_" + name);
            std::filesystem::create_directories(dir);
            for (std::size_t j = 0; j < models.size(); ++j) {
              const std::string id =
                  data.hierarchy.nodes()[static_cast<std::size_t>(data.hierarchy.bottom_node(
                                             static_cast<int>(j)))].id;
              save_model(models[j], dir / (id + ".txt"));
            }
          }
          method_meta["hyperparams"] = detail::hyperparams_json(models.front().hp);
          reconciled = ml_reconcile_forecast(models, base, data.s);
          break;
        }
      }
      if (!coherence_check_panel(data.s, reconciled))
        throw Error(errc::incoherent_panel, "reconciled output failed the coherence check");
      write_forecast_csv(reconciled, out / ("reconciled_" + name + ".csv"));
      method_meta["status"] = "ok";
    } catch (const Error& e) {
      method_meta["status"] = "failed";
      method_meta["error"] = e.what();
      failed.push_back(name);
      err << "method " << name << " failed: " << e.what() << "\n";
    }
    meta["methods"][name] = method_meta;
  }
  detail::write_json(meta, out / "reconcile_meta.json");
  return failed;
}

// `evaluate`: the rolling-origin protocol; writes the report CSV, the text
// table, the per-origin score dump, and the metadata sidecar.
inline void cmd_evaluate(const RunConfig& cfg) {
  const auto data = detail::load_data(cfg);
  const auto methods = detail::resolve_methods(cfg);
  const auto out = std::filesystem::path(cfg.out_dir);
  std::filesystem::create_directories(out);

  EvalConfig eval = cfg.eval;
  if (!cfg.origins_given)
    eval.origins = max_feasible_origins(data.panel.n(), eval.initial_train, eval.horizon);

  const EvalReport report = rolling_origin_evaluate(data.panel, data.hierarchy, methods, eval,
                                                    data.specs, cfg.ml, cfg.seed_or_default(),
                                                    cfg.workers);
  write_report_csv(report, out / "report.csv");
  atomic_write_file(out / "report.txt", render_table(report));
  write_per_origin_csv(report, out / "per_origin_scores.csv");

  nlohmann::json meta;
  meta["version"] = std::string(version_string);
  meta["schema_hash"] = config_schema_hash();
  meta["command"] = "evaluate";
  meta["config"] = detail::config_json(cfg);
  meta["n"] = report.n;
  meta["m"] = data.hierarchy.m();
  meta["k"] = data.hierarchy.depth();
  meta["K"] = report.config.origins;
  meta["levels"] = report.levels;
  meta["exclusions"] = {{"zero_denominator_by_level", report.exclusions_per_level}};
  meta["fallbacks"] = {{"base_model_fallbacks", report.base_fallbacks}};
  meta["failures"] = nlohmann::json::array();
  for (const auto& f : report.failures)
    meta["failures"].push_back(
        {{"method", f.method}, {"origin", f.origin}, {"error", f.message}});
  meta["ml_hyperparams"] = nlohmann::json::object();
  for (const auto& [name, hp] : report.ml_hyperparams)
    meta["ml_hyperparams"][name] = detail::hyperparams_json(hp);
  detail::write_json(meta, out / "run_meta.json");
}

}  // namespace hfr
