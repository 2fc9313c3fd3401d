#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hfr/error.hpp"
#include "hfr/evaluate.hpp"
#include "hfr/forecast.hpp"
#include "hfr/ml_reconcile.hpp"
#include "hfr/version.hpp"

namespace hfr {

// Declarative run configuration: a line-oriented `key = value` file with
// `[section]` headers, overridable by CLI flags. The known key set is
// hashed into the schema hash printed by --version.
struct RunConfig {
  // [data]
  std::string hierarchy_path;
  std::string series_path;
  std::string regressors_path;          // optional
  std::string external_forecasts_path;  // optional

  // [base]
  BaseModelSpec base_default;
  std::map<std::string, BaseModelSpec> base_overrides;  // node id -> spec
  bool capture_residuals = false;

  // [eval]
  EvalConfig eval;
  bool origins_given = false;  // K defaults to the feasibility bound

  // [run]
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::vector<std::string> methods;
  std::string out_dir = "out";

  // [ml]
  MlConfig ml;

  // [td] / [mo]
  TdScheme td_scheme = TdScheme::avg_hist;
  int mo_level = 1;

  // [reconcile]
  bool audit = false;
  bool save_models = false;

  std::uint64_t seed_or_default() const { return seed.value_or(0); }
};

namespace detail {

inline constexpr const char* config_schema_keys[] = {
    "data.hierarchy", "data.series", "data.regressors", "data.external_forecasts",
    "base.model", "base.order", "base.intercept", "base.seasonal_dummies", "base.regressor",
    "base.capture_residuals",
    "eval.s", "eval.N", "eval.h", "eval.K", "eval.p_start", "eval.refit_every",
    "run.seed", "run.workers", "run.methods", "run.out",
    "ml.tune", "ml.budget", "ml.folds", "ml.shared",
    "ml.ntree", "ml.mtry", "ml.nodesize", "ml.eta", "ml.subsample", "ml.colsample_bytree",
    "ml.min_child_weight", "ml.max_depth", "ml.gamma", "ml.nrounds",
    "ml.ntree_min", "ml.ntree_max", "ml.ntree_step", "ml.mtry_min", "ml.mtry_max",
    "ml.nodesize_min", "ml.nodesize_max", "ml.eta_min", "ml.eta_max",
    "ml.subsample_min", "ml.subsample_max", "ml.colsample_min", "ml.colsample_max",
    "ml.min_child_weight_min", "ml.min_child_weight_max", "ml.max_depth_min", "ml.max_depth_max",
    "ml.gamma_min", "ml.gamma_max", "ml.nrounds_min", "ml.nrounds_max",
    "td.scheme", "mo.level",
    "reconcile.audit", "reconcile.save_models",
};

inline std::string trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && (text[b] == ' ' || text[b] == '\t')) ++b;
  while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t' || text[e - 1] == '\r')) --e;
  return std::string(text.substr(b, e - b));
}

inline bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(errc::bad_config, key + ": expected a boolean, got '" + value + "'");
}

inline long config_long(const std::string& value, const std::string& key) {
  try {
    return parse_long(value, key);
  } catch (const DataError& e) {
    throw ConfigError(errc::bad_config, e.what());
  }
}

inline double config_double(const std::string& value, const std::string& key) {
  try {
    return parse_double(value, key);
  } catch (const DataError& e) {
    throw ConfigError(errc::bad_config, e.what());
  }
}

inline BaseModelSpec::Kind parse_base_kind(const std::string& value, const std::string& key) {
  if (value == "seasonal_naive") return BaseModelSpec::Kind::seasonal_naive;
  if (value == "ar") return BaseModelSpec::Kind::ar_ls;
  if (value == "ar_exog") return BaseModelSpec::Kind::ar_ls_exog;
  throw ConfigError(errc::bad_config,
                    key + ": expected seasonal_naive|ar|ar_exog, got '" + value + "'");
}

}  // namespace detail

// Hash of the known configuration keys; changes whenever the schema does.
inline std::string config_schema_hash() {
  std::vector<std::string> keys(std::begin(detail::config_schema_keys),
                                std::end(detail::config_schema_keys));
  std::sort(keys.begin(), keys.end());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const auto& k : keys) {
    hash = fnv1a64(k, hash);
    hash = fnv1a64("\n", hash);
  }
  return hex64(hash);
}

inline RunConfig parse_run_config_text(const std::string& text, const std::string& origin_name) {
  RunConfig cfg;
  cfg.eval.p_start = 0;  // filled by defaulting below when left unset
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string raw;

  // Per-node base overrides are collected first so the default spec can be
  // applied underneath.
  std::map<std::string, std::map<std::string, std::string>> node_overrides;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(errc::bad_config,
                          origin_name + ":" + std::to_string(line_no) + ": malformed section");
      section = line.substr(1, line.size() - 2);
      if (section != "data" && section != "base" && section != "eval" && section != "run" &&
          section != "ml" && section != "td" && section != "mo" && section != "reconcile")
        throw ConfigError(errc::bad_config, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(errc::bad_config,
                        origin_name + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string qualified = section + "." + key;

    if (section == "data") {
      if (key == "hierarchy") cfg.hierarchy_path = value;
      else if (key == "series") cfg.series_path = value;
      else if (key == "regressors") cfg.regressors_path = value;
      else if (key == "external_forecasts") cfg.external_forecasts_path = value;
      else throw ConfigError(errc::bad_config, "unknown key " + qualified);
    } else if (section == "base") {
      // `model.AA = seasonal_naive` overrides one node.
      const auto dot = key.find('.');
      if (dot != std::string::npos) {
        const std::string base_key = key.substr(0, dot);
        const std::string node = key.substr(dot + 1);
        if (base_key != "model" && base_key != "order" && base_key != "intercept" &&
            base_key != "seasonal_dummies" && base_key != "regressor")
          throw ConfigError(errc::bad_config, "unknown key " + qualified);
        node_overrides[node][base_key] = value;
      } else if (key == "model") {
        cfg.base_default.kind = detail::parse_base_kind(value, qualified);
      } else if (key == "order") {
        cfg.base_default.order = static_cast<int>(detail::config_long(value, qualified));
      } else if (key == "intercept") {
        cfg.base_default.intercept = detail::parse_bool(value, qualified);
      } else if (key == "seasonal_dummies") {
        cfg.base_default.seasonal_dummies = detail::parse_bool(value, qualified);
      } else if (key == "regressor") {
        cfg.base_default.regressor_id = value;
      } else if (key == "capture_residuals") {
        cfg.capture_residuals = detail::parse_bool(value, qualified);
      } else {
        throw ConfigError(errc::bad_config, "unknown key " + qualified);
      }
    } else if (section == "eval") {
      if (key == "s") cfg.eval.seasonal_period = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "N") cfg.eval.initial_train = detail::config_long(value, qualified);
      else if (key == "h") cfg.eval.horizon = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "K") {
        cfg.eval.origins = static_cast<int>(detail::config_long(value, qualified));
        cfg.origins_given = true;
      } else if (key == "p_start") cfg.eval.p_start = detail::config_long(value, qualified);
      else if (key == "refit_every")
        cfg.eval.refit_every = static_cast<int>(detail::config_long(value, qualified));
      else throw ConfigError(errc::bad_config, "unknown key " + qualified);
    } else if (section == "run") {
      if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(detail::config_long(value, qualified));
      else if (key == "workers") cfg.workers = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "out") cfg.out_dir = value;
      else if (key == "methods") {
        cfg.methods.clear();
        std::size_t start = 0;
        const std::string list = value;
        for (std::size_t i = 0; i <= list.size(); ++i)
          if (i == list.size() || list[i] == ',') {
            const std::string name = detail::trim(list.substr(start, i - start));
            if (!name.empty()) cfg.methods.push_back(name);
            start = i + 1;
          }
      } else throw ConfigError(errc::bad_config, "unknown key " + qualified);
    } else if (section == "ml") {
      auto& hp = cfg.ml.fixed;
      auto& ranges = cfg.ml.ranges;
      if (key == "tune") cfg.ml.tune = detail::parse_bool(value, qualified);
      else if (key == "budget") cfg.ml.budget = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "folds") cfg.ml.folds = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "shared") cfg.ml.shared_tuning = detail::parse_bool(value, qualified);
      else if (key == "ntree") hp.ntree = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "mtry") hp.mtry = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "nodesize") hp.nodesize = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "eta") hp.eta = detail::config_double(value, qualified);
      else if (key == "subsample") hp.subsample = detail::config_double(value, qualified);
      else if (key == "colsample_bytree") hp.colsample_bytree = detail::config_double(value, qualified);
      else if (key == "min_child_weight")
        hp.min_child_weight = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "max_depth") hp.max_depth = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "gamma") hp.gamma = detail::config_double(value, qualified);
      else if (key == "nrounds") hp.nrounds = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "ntree_min") ranges.ntree_min = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "ntree_max") ranges.ntree_max = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "ntree_step") ranges.ntree_step = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "mtry_min") ranges.mtry_min = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "mtry_max") ranges.mtry_max = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "nodesize_min") ranges.nodesize_min = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "nodesize_max") ranges.nodesize_max = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "eta_min") ranges.eta_min = detail::config_double(value, qualified);
      else if (key == "eta_max") ranges.eta_max = detail::config_double(value, qualified);
      else if (key == "subsample_min") ranges.subsample_min = detail::config_double(value, qualified);
      else if (key == "subsample_max") ranges.subsample_max = detail::config_double(value, qualified);
      else if (key == "colsample_min") ranges.colsample_min = detail::config_double(value, qualified);
      else if (key == "colsample_max") ranges.colsample_max = detail::config_double(value, qualified);
      else if (key == "min_child_weight_min")
        ranges.min_child_weight_min = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "min_child_weight_max")
        ranges.min_child_weight_max = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "max_depth_min") ranges.max_depth_min = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "max_depth_max") ranges.max_depth_max = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "gamma_min") ranges.gamma_min = detail::config_double(value, qualified);
      else if (key == "gamma_max") ranges.gamma_max = detail::config_double(value, qualified);
      else if (key == "nrounds_min") ranges.nrounds_min = static_cast<int>(detail::config_long(value, qualified));
      else if (key == "nrounds_max") ranges.nrounds_max = static_cast<int>(detail::config_long(value, qualified));
      else throw ConfigError(errc::bad_config, "unknown key " + qualified);
    } else if (section == "td") {
      if (key == "scheme") {
        if (value == "td1") cfg.td_scheme = TdScheme::avg_hist;
        else if (value == "td2") cfg.td_scheme = TdScheme::hist_avg;
        else if (value == "fp") cfg.td_scheme = TdScheme::forecasted;
        else throw ConfigError(errc::bad_config, "td.scheme: expected td1|td2|fp");
      } else throw ConfigError(errc::bad_config, "unknown key " + qualified);
    } else if (section == "mo") {
      if (key == "level") cfg.mo_level = static_cast<int>(detail::config_long(value, qualified));
      else throw ConfigError(errc::bad_config, "unknown key " + qualified);
    } else if (section == "reconcile") {
      if (key == "audit") cfg.audit = detail::parse_bool(value, qualified);
      else if (key == "save_models") cfg.save_models = detail::parse_bool(value, qualified);
      else throw ConfigError(errc::bad_config, "unknown key " + qualified);
    } else {
      throw ConfigError(errc::bad_config, "key '" + key + "' appears before any [section]");
    }
  }

  for (const auto& [node, overrides] : node_overrides) {
    BaseModelSpec spec = cfg.base_default;
    for (const auto& [k, v] : overrides) {
      if (k == "model") spec.kind = detail::parse_base_kind(v, "base.model." + node);
      else if (k == "order") spec.order = static_cast<int>(detail::config_long(v, "base.order." + node));
      else if (k == "intercept") spec.intercept = detail::parse_bool(v, "base.intercept." + node);
      else if (k == "seasonal_dummies")
        spec.seasonal_dummies = detail::parse_bool(v, "base.seasonal_dummies." + node);
      else if (k == "regressor") spec.regressor_id = v;
    }
    cfg.base_overrides.emplace(node, spec);
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(errc::bad_config, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str(), path.string());
}

// Per-node base model specs in hierarchy order.
inline std::vector<BaseModelSpec> resolve_specs(const RunConfig& cfg, const Hierarchy& h) {
  std::vector<BaseModelSpec> specs(h.m(), cfg.base_default);
  for (const auto& [node, spec] : cfg.base_overrides) {
    const int idx = h.node_index(node);
    if (idx < 0)
      throw ConfigError(errc::unknown_node, "base model override for unknown node '" + node + "'");
    specs[static_cast<std::size_t>(idx)] = spec;
  }
  return specs;
}

}  // namespace hfr
