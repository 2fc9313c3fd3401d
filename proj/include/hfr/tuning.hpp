#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hfr/ensemble.hpp"
#include "hfr/error.hpp"
#include "hfr/parallel.hpp"
#include "hfr/rng.hpp"
#include "hfr/training_table.hpp"

namespace hfr {

// Search ranges; defaults match the tuned intervals the learners are
// normally run with. All overridable from the run config.
struct HyperRanges {
  // random forest
  int ntree_min = 50, ntree_max = 150, ntree_step = 5;
  int mtry_min = 2, mtry_max = 6;
  int nodesize_min = 10, nodesize_max = 50;
  // gradient boosting
  double eta_min = 0.01, eta_max = 0.05;
  double subsample_min = 0.3, subsample_max = 1.0;
  double colsample_min = 0.3, colsample_max = 1.0;
  int min_child_weight_min = 0, min_child_weight_max = 10;
  int max_depth_min = 2, max_depth_max = 10;
  double gamma_min = 0.0, gamma_max = 5.0;
  int nrounds_min = 50, nrounds_max = 200;
};

// Deterministic candidate stream for the random search. For forests the
// tree count walks the ntree grid (step width 5) while mtry/nodesize are
// drawn at random; for boosting every parameter is drawn from its range.
inline std::vector<HyperParams> sample_candidates(EnsembleKind kind, int budget,
                                                  std::uint64_t seed, const HyperRanges& ranges,
                                                  std::size_t feature_count) {
  Rng rng(Rng::mix(seed, 0x74756e65 /* "tune" */));
  std::vector<HyperParams> out;
  out.reserve(static_cast<std::size_t>(budget));
  std::vector<int> ntree_grid;
  for (int v = ranges.ntree_min; v <= ranges.ntree_max; v += ranges.ntree_step)
    ntree_grid.push_back(v);
  for (int c = 0; c < budget; ++c) {
    HyperParams hp;
    if (kind == EnsembleKind::random_forest) {
      hp.ntree = ntree_grid[static_cast<std::size_t>(c) % ntree_grid.size()];
      hp.mtry = static_cast<int>(rng.uniform_int(ranges.mtry_min, ranges.mtry_max));
      if (feature_count > 0) hp.mtry = std::min<int>(hp.mtry, static_cast<int>(feature_count));
      hp.nodesize = static_cast<int>(rng.uniform_int(ranges.nodesize_min, ranges.nodesize_max));
    } else {
      hp.eta = rng.uniform(ranges.eta_min, ranges.eta_max);
      hp.subsample = rng.uniform(ranges.subsample_min, ranges.subsample_max);
      hp.colsample_bytree = rng.uniform(ranges.colsample_min, ranges.colsample_max);
      hp.min_child_weight = static_cast<int>(
          rng.uniform_int(ranges.min_child_weight_min, ranges.min_child_weight_max));
      hp.max_depth = static_cast<int>(rng.uniform_int(ranges.max_depth_min, ranges.max_depth_max));
      hp.gamma = rng.uniform(ranges.gamma_min, ranges.gamma_max);
      hp.nrounds = static_cast<int>(rng.uniform_int(ranges.nrounds_min, ranges.nrounds_max));
    }
    out.push_back(hp);
  }
  return out;
}

namespace detail {

inline EnsembleModel fit_ensemble(const TrainingTable& table, EnsembleKind kind,
                                  const HyperParams& hp, std::uint64_t seed) {
  return kind == EnsembleKind::random_forest ? fit_random_forest(table, hp, seed)
                                             : fit_gbt(table, hp, seed);
}

}  // namespace detail

// Mean k-fold cross-validated RMSE of one candidate. Folds are contiguous
// blocks in time order; per-fold models use RNG streams derived from
// (seed, fold).
inline double cv_rmse(const TrainingTable& table, EnsembleKind kind, const HyperParams& hp,
                      int folds, std::uint64_t seed) {
  const std::size_t n = table.rows();
  if (folds < 2 || static_cast<std::size_t>(folds) > n)
    throw Error(errc::too_few_rows,
                "need 2 <= folds <= rows: folds = " + std::to_string(folds) + ", rows = " +
                    std::to_string(n));
  double rmse_sum = 0.0;
  for (int fold = 0; fold < folds; ++fold) {
    const std::size_t lo = n * static_cast<std::size_t>(fold) / static_cast<std::size_t>(folds);
    const std::size_t hi =
        n * (static_cast<std::size_t>(fold) + 1) / static_cast<std::size_t>(folds);
    TrainingTable train;
    train.bottom_index = table.bottom_index;
    train.predictors = Matrix(n - (hi - lo), table.features());
    train.target.resize(n - (hi - lo));
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= lo && i < hi) continue;
      for (std::size_t c = 0; c < table.features(); ++c)
        train.predictors(r, c) = table.predictors(i, c);
      train.target[r] = table.target[i];
      ++r;
    }
    const EnsembleModel model =
        detail::fit_ensemble(train, kind, hp, Rng::mix(seed, static_cast<std::uint64_t>(fold), 0xcf));
    double sq = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double err = table.target[i] - model.predict(table.predictors.row(i));
      sq += err * err;
    }
    rmse_sum += std::sqrt(sq / static_cast<double>(hi - lo));
  }
  return rmse_sum / static_cast<double>(folds);
}

// Seeded random search scored by mean k-fold CV RMSE over one or more
// tables (several tables = one shared parameter set for the whole
// hierarchy). Ties go to the earlier draw.
inline HyperParams tune_hyperparameters(std::span<const TrainingTable> tables, EnsembleKind kind,
                                        int budget, int folds, std::uint64_t seed,
                                        const HyperRanges& ranges = {}, int workers = 1) {
  if (tables.empty()) throw Error(errc::empty_records, "no training tables");
  if (budget < 1) throw Error(errc::bad_config, "tuning budget must be >= 1");
  for (const auto& t : tables)
    if (t.rows() < static_cast<std::size_t>(folds) || folds < 2)
      throw Error(errc::too_few_rows, "need 2 <= folds <= rows: folds = " + std::to_string(folds) +
                                          ", rows = " + std::to_string(t.rows()));

  const std::vector<HyperParams> candidates =
      sample_candidates(kind, budget, seed, ranges, tables.front().features());
  std::vector<double> scores(candidates.size());
  parallel_for(candidates.size(), workers, [&](std::size_t c) {
    double acc = 0.0;
    for (std::size_t t = 0; t < tables.size(); ++t)
      acc += cv_rmse(tables[t], kind, candidates[c],
                     folds, Rng::mix(seed, c, t));
    scores[c] = acc / static_cast<double>(tables.size());
  });

  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (scores[c] < scores[best]) best = c;
  return candidates[best];
}

inline HyperParams tune_hyperparameters(const TrainingTable& table, EnsembleKind kind, int budget,
                                        int folds, std::uint64_t seed,
                                        const HyperRanges& ranges = {}, int workers = 1) {
  return tune_hyperparameters(std::span<const TrainingTable>(&table, 1), kind, budget, folds, seed,
                              ranges, workers);
}

}  // namespace hfr
