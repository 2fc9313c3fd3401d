#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hfr/csv.hpp"
#include "hfr/error.hpp"
#include "hfr/parallel.hpp"
#include "hfr/rng.hpp"
#include "hfr/training_table.hpp"
#include "hfr/tree.hpp"

namespace hfr {

enum class EnsembleKind { random_forest, gradient_boosted };

inline const char* ensemble_kind_name(EnsembleKind k) {
  return k == EnsembleKind::random_forest ? "random_forest" : "gradient_boosted";
}

// One flat bag of hyperparameters for both learners; each reads its own
// fields. Defaults sit inside the tuning ranges.
struct HyperParams {
  // random forest
  int ntree = 100;
  int mtry = 3;
  int nodesize = 10;
  // gradient boosting
  double eta = 0.03;
  double subsample = 1.0;
  double colsample_bytree = 1.0;
  int min_child_weight = 1;
  int max_depth = 6;
  double gamma = 0.0;
  int nrounds = 100;

  bool operator==(const HyperParams&) const = default;
};

// Fitted tree ensemble for one bottom series.
//   random forest:    prediction = mean of tree predictions
//   gradient boosted: prediction = base_score + sum_i weight_i * tree_i(x)
struct EnsembleModel {
  EnsembleKind kind = EnsembleKind::random_forest;
  std::vector<Tree> trees;
  std::vector<double> tree_weights;  // boosting only; the learning rate per tree
  double base_score = 0.0;
  HyperParams hp;
  std::uint64_t seed = 0;
  std::size_t feature_count = 0;

  double predict(std::span<const double> x) const {
    if (kind == EnsembleKind::random_forest) {
      double acc = 0.0;
      for (const Tree& t : trees) acc += t.predict(x);
      return trees.empty() ? base_score : acc / static_cast<double>(trees.size());
    }
    double acc = base_score;
    for (std::size_t i = 0; i < trees.size(); ++i) acc += tree_weights[i] * trees[i].predict(x);
    return acc;
  }
};

struct RfOptions {
  bool bootstrap = true;  // test hook: disable to make ntree=1 equal a plain tree
};

// Bagged trees: each tree fits a bootstrap resample (with replacement,
// same size) and samples mtry features per split. Tree i draws from the
// RNG stream (seed, i), so results do not depend on the worker count.
inline EnsembleModel fit_random_forest(const TrainingTable& table, const HyperParams& hp,
                                       std::uint64_t seed, int workers = 1,
                                       const RfOptions& options = {}) {
  const std::size_t n = table.rows();
  if (n == 0) throw Error(errc::empty_records, "empty training table");
  if (hp.ntree < 1 || hp.mtry < 1 || hp.nodesize < 1)
    throw Error(errc::bad_config, "random forest needs ntree, mtry, nodesize >= 1");
  EnsembleModel model;
  model.kind = EnsembleKind::random_forest;
  model.hp = hp;
  model.seed = seed;
  model.feature_count = table.features();
  model.trees.resize(static_cast<std::size_t>(hp.ntree));

  TreeParams params;
  params.max_depth = tree_unlimited_depth;
  params.min_leaf = hp.nodesize;
  params.mtry = hp.mtry;

  parallel_for(model.trees.size(), workers, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    std::vector<int> rows(n);
    if (options.bootstrap) {
      for (std::size_t r = 0; r < n; ++r) rows[r] = static_cast<int>(rng.below(n));
    } else {
      for (std::size_t r = 0; r < n; ++r) rows[r] = static_cast<int>(r);
    }
    model.trees[i] = fit_tree(table.predictors, table.target, rows, params, rng);
  });
  return model;
}

// Gradient boosting with squared loss: base_score is the target mean and
// each round fits a tree to the current residuals, scaled by eta. gamma is
// the minimum SSE reduction a split must achieve; min_child_weight is the
// minimum instance count per child (hessians are 1 under squared loss).
inline EnsembleModel fit_gbt(const TrainingTable& table, const HyperParams& hp,
                             std::uint64_t seed) {
  const std::size_t n = table.rows();
  if (n == 0) throw Error(errc::empty_records, "empty training table");
  const std::size_t m = table.features();

  EnsembleModel model;
  model.kind = EnsembleKind::gradient_boosted;
  model.hp = hp;
  model.seed = seed;
  model.feature_count = m;

  double mean = 0.0;
  for (double v : table.target) mean += v;
  mean /= static_cast<double>(n);
  model.base_score = mean;

  std::vector<double> residual(n);
  for (std::size_t r = 0; r < n; ++r) residual[r] = table.target[r] - mean;

  const auto sample_rows = static_cast<std::size_t>(
      std::max<double>(1.0, std::floor(hp.subsample * static_cast<double>(n))));
  const auto sample_cols = static_cast<std::size_t>(std::max<double>(
      1.0, std::llround(hp.colsample_bytree * static_cast<double>(m))));

  for (int round = 0; round < hp.nrounds; ++round) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(round));

    TreeParams params;
    params.max_depth = hp.max_depth;
    params.min_leaf = std::max(1, hp.min_child_weight);
    params.min_gain = hp.gamma;

    std::vector<int> rows;
    if (sample_rows >= n) {
      rows.resize(n);
      for (std::size_t r = 0; r < n; ++r) rows[r] = static_cast<int>(r);
    } else {
      // without replacement, kept in time order
      std::vector<int> pool(n);
      for (std::size_t r = 0; r < n; ++r) pool[r] = static_cast<int>(r);
      rows = detail::sample_features(pool, static_cast<int>(sample_rows), rng);
    }
    if (sample_cols < m) {
      std::vector<int> all(m);
      for (std::size_t c = 0; c < m; ++c) all[c] = static_cast<int>(c);
      params.features = detail::sample_features(all, static_cast<int>(sample_cols), rng);
    }

    Tree tree = fit_tree(table.predictors, residual, rows, params, rng);
    for (std::size_t r = 0; r < n; ++r)
      residual[r] -= hp.eta * tree.predict(table.predictors.row(r));
    model.trees.push_back(std::move(tree));
    model.tree_weights.push_back(hp.eta);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Model text format
// ---------------------------------------------------------------------------
//
// Line-oriented, one tree per block:
//   hfr-model v1
//   kind=<random_forest|gradient_boosted>
//   seed=<u64>
//   features=<m>
//   base_score=<value>
//   hp=<ntree>,<mtry>,<nodesize>,<eta>,<subsample>,<colsample_bytree>,
//      <min_child_weight>,<max_depth>,<gamma>,<nrounds>     (one line)
//   trees=<count>
//   tree <index> nodes=<count> weight=<value>
//   <id>,<feature>,<threshold>,<left>,<right>   (split node)
//   <id>,leaf,<value>,<count>                   (leaf node)
//   end
// Numbers use shortest round-trip formatting, so reload reproduces
// predictions exactly.

inline std::string serialize_model(const EnsembleModel& model) {
  std::ostringstream out;
  out << "hfr-model v1\n";
  out << "kind=" << ensemble_kind_name(model.kind) << "\n";
  out << "seed=" << model.seed << "\n";
  out << "features=" << model.feature_count << "\n";
  out << "base_score=" << format_double(model.base_score) << "\n";
  const HyperParams& hp = model.hp;
  out << "hp=" << hp.ntree << "," << hp.mtry << "," << hp.nodesize << "," << format_double(hp.eta)
      << "," << format_double(hp.subsample) << "," << format_double(hp.colsample_bytree) << ","
      << hp.min_child_weight << "," << hp.max_depth << "," << format_double(hp.gamma) << ","
      << hp.nrounds << "\n";
  out << "trees=" << model.trees.size() << "\n";
  for (std::size_t i = 0; i < model.trees.size(); ++i) {
    const double weight = model.tree_weights.empty() ? 1.0 : model.tree_weights[i];
    out << "tree " << i << " nodes=" << model.trees[i].nodes.size() << " weight="
        << format_double(weight) << "\n";
    const auto& nodes = model.trees[i].nodes;
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      const TreeNode& n = nodes[id];
      if (n.is_leaf())
        out << id << ",leaf," << format_double(n.value) << "," << n.count << "\n";
      else
        out << id << "," << n.feature << "," << format_double(n.threshold) << "," << n.left << ","
            << n.right << "\n";
    }
  }
  out << "end\n";
  return out.str();
}

inline EnsembleModel parse_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) throw DataError(errc::bad_format, "model file truncated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto expect_key = [&](std::string_view key) -> std::string {
    next_line();
    if (line.rfind(key, 0) != 0)
      throw DataError(errc::bad_format, "expected '" + std::string(key) + "' line, got '" + line + "'");
    return line.substr(key.size());
  };

  if (next_line() != "hfr-model v1")
    throw DataError(errc::bad_format, "not an hfr model file");
  EnsembleModel model;
  const std::string kind = expect_key("kind=");
  if (kind == "random_forest")
    model.kind = EnsembleKind::random_forest;
  else if (kind == "gradient_boosted")
    model.kind = EnsembleKind::gradient_boosted;
  else
    throw DataError(errc::bad_format, "unknown model kind '" + kind + "'");
  {
    const std::string seed_text = expect_key("seed=");
    std::uint64_t seed = 0;
    const auto [p, ec] =
        std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), seed);
    if (ec != std::errc() || p != seed_text.data() + seed_text.size())
      throw DataError(errc::bad_format, "bad seed line '" + seed_text + "'");
    model.seed = seed;
  }
  model.feature_count = static_cast<std::size_t>(parse_long(expect_key("features="), "features"));
  model.base_score = parse_double(expect_key("base_score="), "base_score");
  {
    const auto fields = split_csv_line(expect_key("hp="));
    if (fields.size() != 10) throw DataError(errc::bad_format, "hp line needs 10 fields");
    HyperParams& hp = model.hp;
    hp.ntree = static_cast<int>(parse_long(fields[0], "ntree"));
    hp.mtry = static_cast<int>(parse_long(fields[1], "mtry"));
    hp.nodesize = static_cast<int>(parse_long(fields[2], "nodesize"));
    hp.eta = parse_double(fields[3], "eta");
    hp.subsample = parse_double(fields[4], "subsample");
    hp.colsample_bytree = parse_double(fields[5], "colsample_bytree");
    hp.min_child_weight = static_cast<int>(parse_long(fields[6], "min_child_weight"));
    hp.max_depth = static_cast<int>(parse_long(fields[7], "max_depth"));
    hp.gamma = parse_double(fields[8], "gamma");
    hp.nrounds = static_cast<int>(parse_long(fields[9], "nrounds"));
  }
  const auto tree_count = static_cast<std::size_t>(parse_long(expect_key("trees="), "trees"));
  model.trees.resize(tree_count);
  if (model.kind == EnsembleKind::gradient_boosted) model.tree_weights.resize(tree_count);
  for (std::size_t i = 0; i < tree_count; ++i) {
    next_line();
    std::istringstream head(line);
    std::string word;
    std::size_t index = 0, node_count = 0;
    double weight = 1.0;
    head >> word >> index;
    if (word != "tree" || index != i)
      throw DataError(errc::bad_format, "bad tree header '" + line + "'");
    head >> word;
    if (word.rfind("nodes=", 0) != 0) throw DataError(errc::bad_format, "bad tree header");
    node_count = static_cast<std::size_t>(parse_long(word.substr(6), "nodes"));
    head >> word;
    if (word.rfind("weight=", 0) != 0) throw DataError(errc::bad_format, "bad tree header");
    weight = parse_double(word.substr(7), "weight");
    if (model.kind == EnsembleKind::gradient_boosted) model.tree_weights[i] = weight;
    auto& nodes = model.trees[i].nodes;
    nodes.resize(node_count);
    for (std::size_t id = 0; id < node_count; ++id) {
      const auto fields = split_csv_line(next_line());
      if (fields.size() != 4 && fields.size() != 5)
        throw DataError(errc::bad_format, "bad node line '" + line + "'");
      const auto got = static_cast<std::size_t>(parse_long(fields[0], "node id"));
      if (got != id) throw DataError(errc::bad_format, "node ids must be sequential");
      TreeNode& n = nodes[id];
      if (fields[1] == "leaf") {
        n.feature = -1;
        n.value = parse_double(fields[2], "leaf value");
        n.count = static_cast<int>(parse_long(fields[3], "leaf count"));
      } else {
        n.feature = static_cast<int>(parse_long(fields[1], "feature"));
        n.threshold = parse_double(fields[2], "threshold");
        n.left = static_cast<int>(parse_long(fields[3], "left"));
        n.right = static_cast<int>(parse_long(fields[4], "right"));
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= model.feature_count ||
            n.left < 0 || n.right < 0 || static_cast<std::size_t>(n.left) >= node_count ||
            static_cast<std::size_t>(n.right) >= node_count)
          throw DataError(errc::bad_format, "node references out of range in '" + line + "'");
      }
    }
  }
  if (next_line() != "end") throw DataError(errc::bad_format, "missing 'end' line");
  return model;
}

inline void save_model(const EnsembleModel& model, const std::filesystem::path& path) {
  atomic_write_file(path, serialize_model(model));
}

inline EnsembleModel load_model(const std::filesystem::path& path) {
  return parse_model(read_file(path));
}

}  // namespace hfr
