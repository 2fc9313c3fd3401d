#include <doctest.h>

#include <cmath>

#include "hfr/forecast.hpp"
#include "hfr/rng.hpp"
#include "support/fixtures.hpp"

using namespace hfr;

TEST_SUITE("base_forecast") {

TEST_CASE("seasonal naive repeats the last cycle") {
  std::vector<double> history;
  for (int cycle = 0; cycle < 3; ++cycle)
    for (double v : {10.0, 20.0, 30.0, 40.0}) history.push_back(v);
  const auto f = fit_forecast(BaseModelSpec::seasonal_naive(), history, 4, 4);
  CHECK(f.values == std::vector<double>{10, 20, 30, 40});
  CHECK_FALSE(f.fallback);
  const auto f8 = fit_forecast(BaseModelSpec::seasonal_naive(), history, 4, 8);
  CHECK(f8.values == std::vector<double>{10, 20, 30, 40, 10, 20, 30, 40});
}

TEST_CASE("ar(1) without intercept recovers the decay exactly") {
  std::vector<double> history = {64, 32, 16, 8, 4, 2};
  const auto f = fit_forecast(BaseModelSpec::ar(1, false), history, 1, 2);
  CHECK(f.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.values[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(f.fallback);
}

TEST_CASE("ar recovers exact coefficients on noiseless data") {
  Rng rng(11);
  const std::vector<std::vector<double>> coeff_sets = {
      {0.6}, {0.5, -0.3}, {0.4, 0.2, -0.25}};
  for (const auto& phi : coeff_sets) {
    const int q = static_cast<int>(phi.size());
    std::vector<double> y;
    for (int i = 0; i < q; ++i) y.push_back(rng.uniform(1.0, 5.0));
    for (int t = q; t < 60; ++t) {
      double v = 0.0;
      for (int lag = 1; lag <= q; ++lag)
        v += phi[static_cast<std::size_t>(lag - 1)] * y[static_cast<std::size_t>(t - lag)];
      y.push_back(v);
    }
    // forecasting from the fitted model must equal the true recursion
    const auto f = fit_forecast(BaseModelSpec::ar(q, false), y, 1, 3);
    std::vector<double> ext = y;
    for (int step = 0; step < 3; ++step) {
      double truth = 0.0;
      for (int lag = 1; lag <= q; ++lag)
        truth += phi[static_cast<std::size_t>(lag - 1)] * ext[ext.size() - static_cast<std::size_t>(lag)];
      ext.push_back(truth);
      CHECK(f.values[static_cast<std::size_t>(step)] ==
            doctest::Approx(truth).epsilon(1e-8));
    }
  }
}

TEST_CASE("constant series with intercept forecasts the constant") {
  const std::vector<double> history(24, 3.5);
  for (const auto& spec : {BaseModelSpec::ar(1, true), BaseModelSpec::ar(2, true, true)}) {
    const auto f = fit_forecast(spec, history, 4, 6);
    for (double v : f.values) CHECK(v == doctest::Approx(3.5).epsilon(1e-12));
  }
}

TEST_CASE("rank-deficient design falls back to seasonal naive, flagged") {
  // constant series makes intercept and lag collinear
  const std::vector<double> history(20, 7.0);
  const auto f = fit_forecast(BaseModelSpec::ar(1, true), history, 2, 2);
  CHECK(f.fallback);
  CHECK(f.values == std::vector<double>{7.0, 7.0});
}

TEST_CASE("insufficient history") {
  const std::vector<double> history = {1, 2, 3};
  CHECK_THROWS_AS(fit_forecast(BaseModelSpec::seasonal_naive(), history, 4, 1), Error);
  try {
    fit_forecast(BaseModelSpec::ar(5), history, 1, 1);
  } catch (const Error& e) {
    CHECK(e.code() == errc::insufficient_history);
  }
}

TEST_CASE("exogenous regressor needs future values") {
  std::vector<double> x, y;
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    x.push_back(rng.uniform(0.0, 1.0));
    y.push_back(2.0 * x.back() + 5.0);
  }
  // regressor covers history only: multi-step forecast must fail
  CHECK_THROWS_AS(fit_forecast(BaseModelSpec::ar_exog(1, "x"), y, 1, 2, x), DataError);
  // with future values supplied the exact linear relation is recovered
  std::vector<double> x_full = x;
  x_full.push_back(0.25);
  x_full.push_back(0.75);
  const auto f = fit_forecast(BaseModelSpec::ar_exog(0, "x"), y, 1, 2, x_full);
  CHECK(f.values[0] == doctest::Approx(5.5).epsilon(1e-9));
  CHECK(f.values[1] == doctest::Approx(6.5).epsilon(1e-9));
}

TEST_CASE("seasonal dummies fit a pure seasonal pattern") {
  std::vector<double> y;
  for (int cycle = 0; cycle < 8; ++cycle)
    for (double v : {5.0, 7.0, 4.0}) y.push_back(v);
  const auto f = fit_forecast(BaseModelSpec::ar(0, true, true), y, 3, 3);
  CHECK(f.values[0] == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(f.values[1] == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(f.values[2] == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("rolling_one_step counting and values") {
  Rng rng(17);
  const Hierarchy h = fixtures::three_level();
  const SeriesPanel panel = fixtures::random_coherent_panel(h, 10, 1, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::seasonal_naive());
  const auto records = rolling_one_step(specs, panel, h, 6, 9);
  REQUIRE(records.size() == 4);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].origin == 6 + static_cast<long>(i));
    CHECK(records[i].target_time == 7 + static_cast<long>(i));
    CHECK_FALSE(records[i].fit_failed);
    // seasonal naive with s = 1: forecast = last observation
    for (std::size_t x = 0; x < h.m(); ++x)
      CHECK(records[i].forecasts[x] ==
            panel.values(x, static_cast<std::size_t>(records[i].origin) - 1));
    for (std::size_t j = 0; j < h.bottom_count(); ++j)
      CHECK(records[i].actual_bottom[j] ==
            panel.values(static_cast<std::size_t>(h.bottom_node(static_cast<int>(j))),
                         static_cast<std::size_t>(records[i].origin)));
  }
}

TEST_CASE("rolling records equal a brute-force refit loop") {
  Rng rng(23);
  const Hierarchy h = fixtures::three_level();
  SeriesPanel panel = fixtures::random_coherent_panel(h, 30, 4, rng);
  std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::ar(2, true));
  specs[0] = BaseModelSpec::seasonal_naive();
  const auto records = rolling_one_step(specs, panel, h, 12, 29);
  REQUIRE(records.size() == 18);
  for (const auto& rec : records) {
    for (std::size_t x = 0; x < h.m(); ++x) {
      const auto history = panel.row(x).subspan(0, static_cast<std::size_t>(rec.origin));
      const auto expect = fit_forecast(specs[x], history, panel.seasonal_period, 1);
      CHECK(rec.forecasts[x] == expect.values[0]);
    }
  }
}

TEST_CASE("no leakage: future mutations cannot change earlier records") {
  Rng rng(29);
  const Hierarchy h = fixtures::three_level();
  SeriesPanel panel = fixtures::random_coherent_panel(h, 24, 2, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::ar(1, true));
  const auto before = rolling_one_step(specs, panel, h, 10, 23);

  SeriesPanel mutated = panel;
  for (std::size_t i = 0; i < h.m(); ++i)
    for (std::size_t t = 15; t < 24; ++t) mutated.values(i, t) += 1000.0;
  const auto after = rolling_one_step(specs, mutated, h, 10, 23);

  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i].origin >= 15) continue;  // these see the mutation
    CHECK(before[i].forecasts == after[i].forecasts);
    if (before[i].target_time <= 15) CHECK(before[i].actual_bottom == after[i].actual_bottom);
  }
}

TEST_CASE("one-step residual matrix holds observed minus forecast") {
  Rng rng(37);
  const Hierarchy h = fixtures::three_level();
  const SeriesPanel panel = fixtures::random_coherent_panel(h, 20, 1, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::seasonal_naive());
  const auto records = rolling_one_step(specs, panel, h, 8, 19);
  const Matrix e = one_step_residual_matrix(records, panel, 15);
  REQUIRE(e.rows() == 7);
  REQUIRE(e.cols() == 7);  // origins 8..14
  for (std::size_t col = 0; col < e.cols(); ++col) {
    const auto& rec = records[col];
    for (std::size_t x = 0; x < 7; ++x)
      CHECK(e(x, col) ==
            panel.values(x, static_cast<std::size_t>(rec.target_time) - 1) - rec.forecasts[x]);
  }
  // fewer than three usable residuals is an error
  CHECK_THROWS_AS(one_step_residual_matrix(records, panel, 10), Error);
}

TEST_CASE("seasonal-naive one-step errors are the scaled-metric denominators") {
  Rng rng(31);
  const Hierarchy h = fixtures::three_level();
  const SeriesPanel panel = fixtures::random_coherent_panel(h, 20, 4, rng);
  const std::vector<BaseModelSpec> specs(h.m(), BaseModelSpec::seasonal_naive());
  const auto records = rolling_one_step(specs, panel, h, 8, 19);
  for (const auto& rec : records)
    for (std::size_t x = 0; x < h.m(); ++x) {
      const double expected = panel.values(x, static_cast<std::size_t>(rec.target_time) - 1) -
                              panel.values(x, static_cast<std::size_t>(rec.target_time) - 1 - 4);
      const double err = panel.values(x, static_cast<std::size_t>(rec.target_time) - 1) -
                         rec.forecasts[x];
      CHECK(err == doctest::Approx(expected).epsilon(1e-12));
    }
}

}  // TEST_SUITE
