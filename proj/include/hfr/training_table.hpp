#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hfr/error.hpp"
#include "hfr/forecast.hpp"
#include "hfr/matrix.hpp"

namespace hfr {

// Supervised table for one bottom series: each row pairs the m one-step
// base forecasts made from origin t-1 (predictors) with the observed
// bottom value at t (target). Built from rolling one-step records; records
// whose base fit failed are dropped from every table so the predictor
// matrices stay aligned across bottom series.
struct TrainingTable {
  Matrix predictors;  // rows x m, columns in hierarchy node order
  std::vector<double> target;
  std::vector<long> target_times;
  std::size_t bottom_index = 0;

  std::size_t rows() const { return predictors.rows(); }
  std::size_t features() const { return predictors.cols(); }
};

inline TrainingTable build_training_table(std::span<const RollingOneStepRecord> records,
                                          std::size_t bottom_index) {
  if (records.empty()) throw Error(errc::empty_records, "no rolling records");
  std::size_t usable = 0;
  for (const auto& rec : records)
    if (!rec.fit_failed) ++usable;
  if (usable == 0) throw Error(errc::empty_records, "every rolling record is flagged as failed");

  const std::size_t m = records.front().forecasts.size();
  if (bottom_index >= records.front().actual_bottom.size())
    throw Error(errc::dimension_mismatch,
                "bottom index " + std::to_string(bottom_index) + " out of range");

  TrainingTable table;
  table.bottom_index = bottom_index;
  table.predictors = Matrix(usable, m);
  table.target.resize(usable);
  table.target_times.resize(usable);
  std::size_t r = 0;
  for (const auto& rec : records) {
    if (rec.fit_failed) continue;
    if (rec.forecasts.size() != m)
      throw Error(errc::dimension_mismatch, "record forecast length varies");
    for (std::size_t c = 0; c < m; ++c) table.predictors(r, c) = rec.forecasts[c];
    table.target[r] = rec.actual_bottom[bottom_index];
    table.target_times[r] = rec.target_time;
    ++r;
  }
  return table;
}

}  // namespace hfr
