#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hfr/evaluate.hpp"
#include "hfr/ml_reconcile.hpp"
#include "hfr/reconcile.hpp"
#include "hfr/rng.hpp"
#include "support/fixtures.hpp"

using namespace hfr;

namespace {

// stub that copies the base forecast of one node through
struct CopyPredictor {
  std::size_t node;
  double predict(std::span<const double> x) const { return x[node]; }
};

struct ConstantPredictor {
  double value;
  double predict(std::span<const double>) const { return value; }
};

std::vector<RollingOneStepRecord> synthetic_records(const Hierarchy& h, std::size_t count,
                                                    Rng& rng) {
  std::vector<RollingOneStepRecord> records(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& rec = records[i];
    rec.origin = static_cast<long>(i) + 10;
    rec.target_time = rec.origin + 1;
    rec.forecasts.resize(h.m());
    for (auto& f : rec.forecasts) f = rng.uniform(0.0, 10.0);
    rec.actual_bottom.resize(h.bottom_count());
    for (auto& a : rec.actual_bottom) a = rng.uniform(0.0, 10.0);
    rec.fallback.assign(h.m(), 0);
  }
  return records;
}

}  // namespace

TEST_SUITE("ml_reconcile") {

TEST_CASE("training table shape and contents") {
  Rng rng(3);
  const Hierarchy h = fixtures::three_level();
  const SeriesPanel panel = fixtures::random_coherent_panel(h, 24, 1, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::seasonal_naive());
  const auto records = rolling_one_step(specs, panel, h, 12, 23);
  REQUIRE(records.size() == 12);
  const TrainingTable t = build_training_table(records, 2);
  CHECK(t.rows() == 12);
  CHECK(t.features() == 7);
  CHECK(t.bottom_index == 2);
  for (std::size_t r = 0; r < 12; ++r) {
    for (std::size_t c = 0; c < 7; ++c) CHECK(t.predictors(r, c) == records[r].forecasts[c]);
    CHECK(t.target[r] == records[r].actual_bottom[2]);
    CHECK(t.target_times[r] == records[r].target_time);
  }
  CHECK_THROWS_AS(build_training_table(std::vector<RollingOneStepRecord>{}, 0), Error);
}

TEST_CASE("perfect base forecasts make the own column equal the target") {
  Rng rng(5);
  const Hierarchy h = fixtures::three_level();
  auto records = synthetic_records(h, 10, rng);
  for (auto& rec : records)
    for (std::size_t j = 0; j < 4; ++j) rec.forecasts[3 + j] = rec.actual_bottom[j];
  const TrainingTable t = build_training_table(records, 1);
  for (std::size_t r = 0; r < t.rows(); ++r) CHECK(t.predictors(r, 4) == t.target[r]);
}

TEST_CASE("record order does not matter after sorting by target time") {
  Rng rng(7);
  const Hierarchy h = fixtures::three_level();
  auto records = synthetic_records(h, 9, rng);
  auto shuffled = records;
  // deterministic shuffle
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  std::sort(shuffled.begin(), shuffled.end(),
            [](const auto& a, const auto& b) { return a.target_time < b.target_time; });
  const TrainingTable a = build_training_table(records, 0);
  const TrainingTable b = build_training_table(shuffled, 0);
  CHECK(a.predictors == b.predictors);
  CHECK(a.target == b.target);
}

TEST_CASE("flagged records are dropped from every table") {
  Rng rng(9);
  const Hierarchy h = fixtures::three_level();
  auto records = synthetic_records(h, 8, rng);
  records[2].fit_failed = true;
  records[5].fit_failed = true;
  for (std::size_t j = 0; j < 4; ++j) {
    const TrainingTable t = build_training_table(records, j);
    CHECK(t.rows() == 6);
    for (long time : t.target_times) {
      CHECK(time != records[2].target_time);
      CHECK(time != records[5].target_time);
    }
  }
}

TEST_CASE("identity stubs reproduce the bottom-up path") {
  Rng rng(11);
  const Hierarchy h = fixtures::three_level();
  const SummingMatrix s = summing_matrix(h);
  const ForecastPanel base = fixtures::random_base_panel(h, 6, rng);
  std::vector<CopyPredictor> stubs;
  for (std::size_t j = 0; j < 4; ++j) stubs.push_back(CopyPredictor{3 + j});
  const ForecastPanel ml = ml_reconcile_forecast(stubs, base, s);
  const ForecastPanel bu = reconcile(s, g_bottom_up(h), base);
  for (std::size_t i = 0; i < h.m(); ++i)
    for (std::size_t t = 0; t < 6; ++t)
      CHECK(ml.values(i, t) == doctest::Approx(bu.values(i, t)).epsilon(1e-12));
}

TEST_CASE("constant stubs aggregate to subtree sizes") {
  Rng rng(13);
  const Hierarchy h = fixtures::three_level();
  const SummingMatrix s = summing_matrix(h);
  const ForecastPanel base = fixtures::random_base_panel(h, 2, rng);
  const std::vector<ConstantPredictor> stubs(4, ConstantPredictor{3.0});
  const ForecastPanel ml = ml_reconcile_forecast(stubs, base, s);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(ml.values(0, t) == 12.0);
    CHECK(ml.values(1, t) == 6.0);
    CHECK(ml.values(3, t) == 3.0);
  }
  // wrong model count
  const std::vector<ConstantPredictor> three(3, ConstantPredictor{1.0});
  CHECK_THROWS_AS(ml_reconcile_forecast(three, base, s), Error);
}

TEST_CASE("fitted models produce coherent forecasts") {
  Rng rng(17);
  const Hierarchy h = fixtures::three_level();
  const SummingMatrix s = summing_matrix(h);
  const SeriesPanel panel = fixtures::random_coherent_panel(h, 40, 4, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::seasonal_naive());
  MlConfig cfg;
  cfg.kind = EnsembleKind::random_forest;
  cfg.fixed.ntree = 10;
  cfg.fixed.mtry = 3;
  cfg.fixed.nodesize = 2;
  const auto models = fit_ml_reconciler(panel, h, specs, 20, cfg, 42);
  REQUIRE(models.size() == 4);
  const ForecastPanel base = base_forecast_panel(specs, panel, h, 40, 4);
  const ForecastPanel rec = ml_reconcile_forecast(models, base, s);
  std::vector<double> column(h.m());
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t i = 0; i < h.m(); ++i) column[i] = rec.values(i, t);
    CHECK(coherence_check(s, column, 1e-9));
  }
}

TEST_CASE("models per bottom series and table sizes follow the protocol") {
  Rng rng(19);
  const Hierarchy h = fixtures::three_level();
  const SeriesPanel panel = fixtures::random_coherent_panel(h, 24, 1, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::seasonal_naive());
  MlConfig cfg;
  cfg.fixed.ntree = 5;
  cfg.fixed.mtry = 2;
  cfg.fixed.nodesize = 2;
  const auto models = fit_ml_reconciler(panel, h, specs, 12, cfg, 7);
  REQUIRE(models.size() == 4);
  for (const auto& model : models) {
    CHECK(model.feature_count == 7);
    CHECK(model.hp == cfg.fixed);  // tuning disabled uses the fixed params verbatim
  }
}

TEST_CASE("self-predictive bottom series reaches ~zero cv rmse") {
  const Hierarchy h = fixtures::three_level();
  const SummingMatrix s = summing_matrix(h);
  // periodic bottom series: seasonal naive is exact, so the own-forecast
  // column equals the target
  SeriesPanel panel;
  panel.node_ids = h.node_ids();
  panel.seasonal_period = 4;
  panel.values = Matrix(h.m(), 24);
  const double cycle[4] = {3, 6, 9, 12};
  std::vector<double> bottom(4);
  for (std::size_t t = 0; t < 24; ++t) {
    for (std::size_t j = 0; j < 4; ++j) bottom[j] = cycle[(t + j) % 4] + static_cast<double>(j);
    const auto full = aggregate_bottom(s, bottom);
    for (std::size_t i = 0; i < h.m(); ++i) panel.values(i, t) = full[i];
  }
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::seasonal_naive());
  const auto records = rolling_one_step(specs, panel, h, 12, 23);
  const TrainingTable t = build_training_table(records, 0);
  HyperParams hp;
  hp.eta = 1.0;
  hp.nrounds = 2;
  hp.max_depth = 3;
  hp.min_child_weight = 1;
  hp.gamma = 0.0;
  const double rmse = cv_rmse(t, EnsembleKind::gradient_boosted, hp, 3, 5);
  CHECK(rmse < 1e-9);
}

TEST_CASE("truncating the panel never changes earlier training rows") {
  Rng rng(23);
  const Hierarchy h = fixtures::three_level();
  const SeriesPanel panel = fixtures::random_coherent_panel(h, 30, 2, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::ar(1, true));
  const auto records_full = rolling_one_step(specs, panel, h, 10, 29);
  const SeriesPanel cut = hfr::detail::truncate_panel(panel, 24);
  const auto records_cut = rolling_one_step(specs, cut, h, 10, 23);
  for (std::size_t j = 0; j < 4; ++j) {
    const TrainingTable full_table = build_training_table(records_cut, j);
    TrainingTable prefix = build_training_table(records_full, j);
    for (std::size_t r = 0; r < full_table.rows(); ++r) {
      CHECK(full_table.target[r] == prefix.target[r]);
      for (std::size_t c = 0; c < 7; ++c)
        CHECK(full_table.predictors(r, c) == prefix.predictors(r, c));
    }
  }
}

TEST_CASE("per-bottom and shared tuning both run deterministically") {
  Rng rng(29);
  const Hierarchy h = fixtures::three_level();
  const SeriesPanel panel = fixtures::random_coherent_panel(h, 30, 1, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::seasonal_naive());
  MlConfig cfg;
  cfg.kind = EnsembleKind::gradient_boosted;
  cfg.tune = true;
  cfg.budget = 2;
  cfg.folds = 3;
  cfg.ranges.nrounds_min = 5;
  cfg.ranges.nrounds_max = 10;
  for (bool shared : {true, false}) {
    cfg.shared_tuning = shared;
    const auto a = fit_ml_reconciler(panel, h, specs, 14, cfg, 99, 1);
    const auto b = fit_ml_reconciler(panel, h, specs, 14, cfg, 99, 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j)
      CHECK(serialize_model(a[j]) == serialize_model(b[j]));
  }
}

}  // TEST_SUITE
