#include <doctest.h>

#include <cmath>

#include "hfr/ensemble.hpp"
#include "hfr/rng.hpp"
#include "hfr/training_table.hpp"
#include "hfr/tree.hpp"
#include "support/oracles.hpp"

using namespace hfr;

namespace {

TrainingTable make_table(const Matrix& x, const std::vector<double>& y) {
  TrainingTable t;
  t.predictors = x;
  t.target = y;
  t.target_times.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t.target_times[i] = static_cast<long>(i + 1);
  return t;
}

TrainingTable random_table(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix x(rows, cols);
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) x(r, c) = rng.uniform(-5.0, 5.0);
    y[r] = x(r, 0) * x(r, 0) - 2.0 * x(r, cols > 1 ? 1 : 0) + rng.uniform(-0.2, 0.2);
  }
  return make_table(x, y);
}

std::vector<double> predictions(const EnsembleModel& model, const Matrix& x) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.predict(x.row(r));
  return out;
}

}  // namespace

TEST_SUITE("tree_ensemble") {

TEST_CASE("constant target collapses to a single leaf") {
  Matrix x(6, 2);
  Rng rng(1);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 2; ++c) x(r, c) = rng.uniform(0, 1);
  const std::vector<double> y(6, 3.0);
  TreeParams params;
  const Tree tree = fit_tree(x, y, params, rng);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].is_leaf());
  CHECK(tree.nodes[0].value == 3.0);
  CHECK(tree.nodes[0].count == 6);
}

TEST_CASE("separable step function needs one split") {
  Matrix x(8, 1);
  std::vector<double> y(8);
  for (std::size_t r = 0; r < 8; ++r) {
    x(r, 0) = static_cast<double>(r) - 4.0 + 0.5;
    y[r] = x(r, 0) < 0 ? 0.0 : 1.0;
  }
  Rng rng(5);
  TreeParams params;
  const Tree tree = fit_tree(x, y, params, rng);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].feature == 0);
  for (std::size_t r = 0; r < 8; ++r) CHECK(tree.predict(x.row(r)) == y[r]);
}

TEST_CASE("tree SSE never exceeds the single-leaf mean") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const TrainingTable t = random_table(30, 3, rng);
    TreeParams params;
    params.max_depth = 4;
    params.min_leaf = 3;
    Rng tree_rng = Rng::stream(42, static_cast<std::uint64_t>(trial));
    const Tree tree = fit_tree(t.predictors, t.target, params, tree_rng);
    std::vector<double> preds(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) preds[r] = tree.predict(t.predictors.row(r));
    const double mean = oracles::mean_of(t.target);
    const std::vector<double> flat(t.rows(), mean);
    CHECK(oracles::sse_against(t.target, preds) <=
          oracles::sse_against(t.target, flat) + 1e-9);
  }
}

TEST_CASE("min_leaf is respected by every leaf") {
  Rng rng(15);
  const TrainingTable t = random_table(40, 2, rng);
  TreeParams params;
  params.min_leaf = 7;
  const Tree tree = fit_tree(t.predictors, t.target, params, rng);
  for (const auto& node : tree.nodes)
    if (node.is_leaf()) CHECK(node.count >= 7);
}

TEST_CASE("split thresholds shift with a constant offset, predictions do not") {
  // values on a 0.5 grid so midpoints and the +16 shift are exact in binary
  Matrix x(12, 2);
  std::vector<double> y(12);
  Rng rng(77);
  for (std::size_t r = 0; r < 12; ++r) {
    x(r, 0) = 0.5 * static_cast<double>(r % 5);
    x(r, 1) = 0.5 * static_cast<double>((r * 7) % 9);
    y[r] = (x(r, 0) >= 1.0 ? 3.0 : -1.0) + (x(r, 1) >= 2.0 ? 0.5 : 0.0);
  }
  TreeParams params;
  Rng rng_a = Rng::stream(5, 0), rng_b = Rng::stream(5, 0);
  const Tree tree = fit_tree(x, y, params, rng_a);

  Matrix shifted = x;
  for (std::size_t r = 0; r < 12; ++r) shifted(r, 0) += 16.0;
  const Tree tree2 = fit_tree(shifted, y, params, rng_b);

  REQUIRE(tree.nodes.size() == tree2.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& a = tree.nodes[i];
    const auto& b = tree2.nodes[i];
    CHECK(a.feature == b.feature);
    if (!a.is_leaf())
      CHECK(b.threshold == (a.feature == 0 ? a.threshold + 16.0 : a.threshold));
    if (a.is_leaf()) CHECK(a.value == b.value);
  }
  for (std::size_t r = 0; r < 12; ++r)
    CHECK(tree.predict(x.row(r)) == tree2.predict(shifted.row(r)));
}

TEST_CASE("random forest prediction is the mean of its trees") {
  Rng rng(21);
  const TrainingTable t = random_table(50, 4, rng);
  HyperParams hp;
  hp.ntree = 11;
  hp.mtry = 2;
  hp.nodesize = 5;
  const EnsembleModel model = fit_random_forest(t, hp, 99);
  REQUIRE(model.trees.size() == 11);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double acc = 0.0;
    for (const auto& tree : model.trees) acc += tree.predict(t.predictors.row(r));
    CHECK(model.predict(t.predictors.row(r)) ==
          doctest::Approx(acc / 11.0).epsilon(1e-12));
  }
}

TEST_CASE("single-tree forest without bootstrap equals a plain tree") {
  Rng rng(33);
  const TrainingTable t = random_table(25, 3, rng);
  HyperParams hp;
  hp.ntree = 1;
  hp.mtry = 3;  // all features
  hp.nodesize = 2;
  RfOptions options;
  options.bootstrap = false;
  const EnsembleModel model = fit_random_forest(t, hp, 7, 1, options);

  TreeParams params;
  params.min_leaf = 2;
  params.mtry = 3;
  Rng tree_rng = Rng::stream(7, 0);
  const Tree tree = fit_tree(t.predictors, t.target, params, tree_rng);
  for (std::size_t r = 0; r < t.rows(); ++r)
    CHECK(model.predict(t.predictors.row(r)) == tree.predict(t.predictors.row(r)));
}

TEST_CASE("constant target: any forest predicts the constant") {
  Rng rng(41);
  Matrix x(30, 3);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 3; ++c) x(r, c) = rng.uniform(-1, 1);
  const TrainingTable t = make_table(x, std::vector<double>(30, 2.5));
  HyperParams hp;
  hp.ntree = 13;
  hp.mtry = 1;
  hp.nodesize = 4;
  const EnsembleModel model = fit_random_forest(t, hp, 3);
  for (std::size_t r = 0; r < 30; ++r) CHECK(model.predict(x.row(r)) == 2.5);
}

TEST_CASE("forest fits are deterministic and worker-count invariant") {
  Rng rng(55);
  const TrainingTable t = random_table(60, 5, rng);
  HyperParams hp;
  hp.ntree = 20;
  hp.mtry = 2;
  hp.nodesize = 3;
  const EnsembleModel a = fit_random_forest(t, hp, 1234, 1);
  const EnsembleModel b = fit_random_forest(t, hp, 1234, 1);
  const EnsembleModel c = fit_random_forest(t, hp, 1234, 4);
  CHECK(serialize_model(a) == serialize_model(b));
  CHECK(serialize_model(a) == serialize_model(c));
  CHECK(predictions(a, t.predictors) == predictions(c, t.predictors));
  const EnsembleModel d = fit_random_forest(t, hp, 1235, 1);
  CHECK(serialize_model(a) != serialize_model(d));
}

TEST_CASE("gbt prediction is base score plus weighted trees") {
  Rng rng(61);
  const TrainingTable t = random_table(40, 3, rng);
  HyperParams hp;
  hp.eta = 0.2;
  hp.nrounds = 15;
  hp.max_depth = 3;
  hp.min_child_weight = 1;
  hp.subsample = 1.0;
  hp.colsample_bytree = 1.0;
  hp.gamma = 0.0;
  const EnsembleModel model = fit_gbt(t, hp, 5);
  REQUIRE(model.trees.size() == 15);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double acc = model.base_score;
    for (std::size_t i = 0; i < model.trees.size(); ++i)
      acc += model.tree_weights[i] * model.trees[i].predict(t.predictors.row(r));
    CHECK(model.predict(t.predictors.row(r)) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("gbt with zero rounds predicts the target mean") {
  Rng rng(63);
  const TrainingTable t = random_table(12, 2, rng);
  HyperParams hp;
  hp.nrounds = 0;
  const EnsembleModel model = fit_gbt(t, hp, 1);
  const double mean = oracles::mean_of(t.target);
  for (std::size_t r = 0; r < t.rows(); ++r)
    CHECK(model.predict(t.predictors.row(r)) == mean);
}

TEST_CASE("one full-strength round equals a single tree on centered targets") {
  Rng rng(65);
  const TrainingTable t = random_table(30, 3, rng);
  HyperParams hp;
  hp.eta = 1.0;
  hp.nrounds = 1;
  hp.max_depth = 50;
  hp.gamma = 0.0;
  hp.min_child_weight = 1;
  hp.subsample = 1.0;
  hp.colsample_bytree = 1.0;
  const EnsembleModel model = fit_gbt(t, hp, 9);

  const double mean = oracles::mean_of(t.target);
  std::vector<double> centered(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) centered[r] = t.target[r] - mean;
  TreeParams params;
  params.max_depth = 50;
  Rng tree_rng = Rng::stream(9, 0);
  const Tree tree = fit_tree(t.predictors, centered, params, tree_rng);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double lhs = t.target[r] - model.predict(t.predictors.row(r));
    const double rhs = centered[r] - tree.predict(t.predictors.row(r));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("gbt training rmse is non-increasing per round") {
  Rng rng(67);
  const TrainingTable t = random_table(50, 4, rng);
  HyperParams hp;
  hp.eta = 0.3;
  hp.nrounds = 40;
  hp.max_depth = 3;
  hp.gamma = 0.0;
  hp.min_child_weight = 1;
  hp.subsample = 1.0;
  hp.colsample_bytree = 1.0;
  const EnsembleModel model = fit_gbt(t, hp, 31);
  std::vector<double> acc(t.rows(), model.base_score);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t round = 0; round < model.trees.size(); ++round) {
    for (std::size_t r = 0; r < t.rows(); ++r)
      acc[r] += model.tree_weights[round] * model.trees[round].predict(t.predictors.row(r));
    const double rmse = std::sqrt(oracles::sse_against(t.target, acc) /
                                  static_cast<double>(t.rows()));
    CHECK(rmse <= prev + 1e-12);
    prev = rmse;
  }
}

TEST_CASE("gbt determinism for fixed seed") {
  Rng rng(69);
  const TrainingTable t = random_table(35, 3, rng);
  HyperParams hp;
  hp.eta = 0.1;
  hp.nrounds = 10;
  hp.subsample = 0.7;
  hp.colsample_bytree = 0.6;
  hp.max_depth = 4;
  const EnsembleModel a = fit_gbt(t, hp, 2000);
  const EnsembleModel b = fit_gbt(t, hp, 2000);
  CHECK(serialize_model(a) == serialize_model(b));
}

TEST_CASE("model text format round-trips predictions exactly") {
  Rng rng(71);
  const TrainingTable t = random_table(40, 4, rng);
  HyperParams rf_hp;
  rf_hp.ntree = 7;
  rf_hp.mtry = 2;
  rf_hp.nodesize = 3;
  HyperParams gbt_hp;
  gbt_hp.eta = 0.17;
  gbt_hp.nrounds = 9;
  gbt_hp.max_depth = 4;
  for (const EnsembleModel& model :
       {fit_random_forest(t, rf_hp, 11), fit_gbt(t, gbt_hp, 12)}) {
    const std::string text = serialize_model(model);
    const EnsembleModel back = parse_model(text);
    CHECK(back.kind == model.kind);
    CHECK(back.hp == model.hp);
    CHECK(back.seed == model.seed);
    CHECK(back.base_score == model.base_score);
    for (std::size_t r = 0; r < t.rows(); ++r)
      CHECK(back.predict(t.predictors.row(r)) == model.predict(t.predictors.row(r)));
    CHECK(serialize_model(back) == text);
  }
  CHECK_THROWS_AS(parse_model("not a model"), DataError);
}

}  // TEST_SUITE
