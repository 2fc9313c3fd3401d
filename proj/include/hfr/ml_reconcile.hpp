#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "hfr/ensemble.hpp"
#include "hfr/error.hpp"
#include "hfr/forecast.hpp"
#include "hfr/hierarchy.hpp"
#include "hfr/parallel.hpp"
#include "hfr/training_table.hpp"
#include "hfr/tuning.hpp"

namespace hfr {

template <class M>
concept BottomPredictor = requires(const M& m, std::span<const double> x) {
  { m.predict(x) } -> std::convertible_to<double>;
};

struct MlConfig {
  EnsembleKind kind = EnsembleKind::random_forest;
  bool tune = false;
  int budget = 20;
  int folds = 10;
  bool shared_tuning = true;  // one HyperParams for the whole hierarchy
  HyperParams fixed;          // used verbatim when tune is off
  HyperRanges ranges;
};

// Feeds the m base forecasts of each horizon step to every bottom model and
// aggregates the predicted bottom values with S, so the output is coherent
// by construction.
template <BottomPredictor Model>
ForecastPanel ml_reconcile_forecast(std::span<const Model> models, const ForecastPanel& base,
                                    const SummingMatrix& s) {
  const std::size_t m = s.rows();
  const std::size_t mk = s.cols();
  if (models.size() != mk)
    throw Error(errc::model_count_mismatch, "need " + std::to_string(mk) + " bottom models, got " +
                                                std::to_string(models.size()));
  if (base.m() != m)
    throw Error(errc::dimension_mismatch, "base panel has " + std::to_string(base.m()) +
                                              " series, hierarchy has " + std::to_string(m));
  ForecastPanel out;
  out.node_ids = base.node_ids;
  out.origin = base.origin;
  out.fallback = base.fallback;
  out.values = Matrix(m, base.horizon());

  std::vector<double> inputs(m);
  std::vector<double> bottom(mk);
  for (std::size_t step = 0; step < base.horizon(); ++step) {
    for (std::size_t i = 0; i < m; ++i) {
      inputs[i] = base.values(i, step);
      if (!std::isfinite(inputs[i]))
        throw Error(errc::bad_format, "non-finite base forecast at step " + std::to_string(step + 1));
    }
    for (std::size_t j = 0; j < mk; ++j) bottom[j] = models[j].predict(inputs);
    const std::vector<double> full = aggregate_bottom(s, bottom);
    for (std::size_t i = 0; i < m; ++i) out.values(i, step) = full[i];
  }
  return out;
}

template <BottomPredictor Model>
ForecastPanel ml_reconcile_forecast(const std::vector<Model>& models, const ForecastPanel& base,
                                    const SummingMatrix& s) {
  return ml_reconcile_forecast(std::span<const Model>(models), base, s);
}

// Fits one ensemble per bottom series from tables of rolling one-step base
// forecasts. The per-model seed mixes in the bottom index, so fits are
// reproducible and independent of the worker count.
inline std::vector<EnsembleModel> fit_ml_models(const std::vector<TrainingTable>& tables,
                                                const MlConfig& cfg, std::uint64_t seed,
                                                int workers = 1) {
  const std::size_t mk = tables.size();
  std::vector<HyperParams> hp(mk, cfg.fixed);
  if (cfg.tune) {
    if (cfg.shared_tuning) {
      const HyperParams shared =
          tune_hyperparameters(std::span<const TrainingTable>(tables.data(), tables.size()),
                               cfg.kind, cfg.budget, cfg.folds, seed, cfg.ranges, workers);
      hp.assign(mk, shared);
    } else {
      parallel_for(mk, workers, [&](std::size_t j) {
        hp[j] = tune_hyperparameters(tables[j], cfg.kind, cfg.budget, cfg.folds,
                                     Rng::mix(seed, j, 0x744a), cfg.ranges, 1);
      });
    }
  }
  std::vector<EnsembleModel> models(mk);
  parallel_for(mk, workers, [&](std::size_t j) {
    const std::uint64_t model_seed = Rng::mix(seed, j, 0x666974);
    models[j] = cfg.kind == EnsembleKind::random_forest
                    ? fit_random_forest(tables[j], hp[j], model_seed)
                    : fit_gbt(tables[j], hp[j], model_seed);
  });
  return models;
}

// End-to-end trainer: rolling one-step records from p_start to n-1, one
// training table per bottom series, optional tuning, one model per bottom
// series.
inline std::vector<EnsembleModel> fit_ml_reconciler(const SeriesPanel& panel, const Hierarchy& h,
                                                    const std::vector<BaseModelSpec>& specs,
                                                    long p_start, const MlConfig& cfg,
                                                    std::uint64_t seed, int workers = 1) {
  const auto records =
      rolling_one_step(specs, panel, h, p_start, static_cast<long>(panel.n()) - 1, workers);
  std::vector<TrainingTable> tables;
  tables.reserve(h.bottom_count());
  for (std::size_t j = 0; j < h.bottom_count(); ++j)
    tables.push_back(build_training_table(records, j));
  return fit_ml_models(tables, cfg, seed, workers);
}

}  // namespace hfr
