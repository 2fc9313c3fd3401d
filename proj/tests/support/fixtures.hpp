#pragma once

// Shared test fixtures: the small three-level hierarchy used everywhere,
// random hierarchy/panel generators, and the deterministic synthetic
// dataset for end-to-end runs. Fixture arithmetic avoids libm so the
// pinned regression values are stable across platforms.

#include <string>
#include <utility>
#include <vector>

#include "hfr/forecast.hpp"
#include "hfr/hierarchy.hpp"
#include "hfr/matrix.hpp"
#include "hfr/rng.hpp"
#include "hfr/series.hpp"

namespace fixtures {

using hfr::Hierarchy;
using hfr::Matrix;
using hfr::Rng;

// T -> (A, B), A -> (AA, AB), B -> (BA, BB): m = 7, m_k = 4.
inline Hierarchy three_level() {
  return Hierarchy::from_edges(
      {{"T", "A"}, {"T", "B"}, {"A", "AA"}, {"A", "AB"}, {"B", "BA"}, {"B", "BB"}});
}

// Random strict tree with uniform leaf depth and the given fan-out range.
inline Hierarchy random_hierarchy(Rng& rng, int depth, int fanout_min = 2, int fanout_max = 5) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> frontier = {"r"};
  for (int level = 1; level <= depth; ++level) {
    std::vector<std::string> next;
    for (const auto& parent : frontier) {
      const long fanout = rng.uniform_int(fanout_min, fanout_max);
      for (long c = 0; c < fanout; ++c) {
        std::string child = parent + "." + std::to_string(c);
        edges.emplace_back(parent, child);
        next.push_back(std::move(child));
      }
    }
    frontier = std::move(next);
  }
  return Hierarchy::from_edges(edges);
}

// Coherent panel: positive bottom series, upper levels aggregated exactly.
inline hfr::SeriesPanel random_coherent_panel(const Hierarchy& h, std::size_t n, int s, Rng& rng) {
  const auto sm = hfr::summing_matrix(h);
  hfr::SeriesPanel panel;
  panel.node_ids = h.node_ids();
  panel.seasonal_period = s;
  panel.values = Matrix(h.m(), n);
  std::vector<double> bottom(h.bottom_count());
  for (std::size_t t = 0; t < n; ++t) {
    for (auto& b : bottom) b = rng.uniform(1.0, 100.0);
    const auto full = hfr::aggregate_bottom(sm, bottom);
    for (std::size_t i = 0; i < h.m(); ++i) panel.values(i, t) = full[i];
  }
  return panel;
}

// Base forecast panel with arbitrary (incoherent) positive values.
inline hfr::ForecastPanel random_base_panel(const Hierarchy& h, int horizon, Rng& rng) {
  hfr::ForecastPanel panel;
  panel.node_ids = h.node_ids();
  panel.origin = 0;
  panel.values = Matrix(h.m(), static_cast<std::size_t>(horizon));
  panel.fallback.assign(h.m(), 0);
  for (std::size_t i = 0; i < h.m(); ++i)
    for (std::size_t t = 0; t < static_cast<std::size_t>(horizon); ++t)
      panel.values(i, t) = rng.uniform(1.0, 100.0);
  return panel;
}

// Seeded residual matrix (standard normal).
inline Matrix random_residuals(std::size_t m, std::size_t t_count, Rng& rng) {
  Matrix e(m, t_count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < t_count; ++t) e(i, t) = rng.normal();
  return e;
}

// Random symmetric positive-definite matrix A A' + eps I.
inline Matrix random_spd(std::size_t m, Rng& rng, double eps = 0.5) {
  Matrix a(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  Matrix w = hfr::matmul(a, hfr::transpose(a));
  for (std::size_t i = 0; i < m; ++i) w(i, i) += eps;
  return w;
}

// Deterministic seasonal shape without libm: a fixed 12-point pattern.
inline double season_wave(long t, int s) {
  static const double pattern[12] = {0.0,  0.5,  0.87, 1.0,  0.87, 0.5,
                                     0.0, -0.5, -0.87, -1.0, -0.87, -0.5};
  const int idx = static_cast<int>((t - 1) % s);
  return pattern[(idx * 12) / s];
}

// Synthetic coherent panel where bottom series are nonlinear functions of
// shared seasonal signals (normalized rotating shares of a common total)
// plus independent noise. The shared structure is strictly periodic, so the
// cross-series information is learnable; only rational arithmetic and the
// seeded RNG are used, keeping pinned values stable across platforms.
inline hfr::SeriesPanel synthetic_nonlinear_panel(const Hierarchy& h, std::size_t n, int s,
                                                  std::uint64_t seed) {
  Rng rng(seed);
  const auto sm = hfr::summing_matrix(h);
  hfr::SeriesPanel panel;
  panel.node_ids = h.node_ids();
  panel.seasonal_period = s;
  panel.values = Matrix(h.m(), n);
  const std::size_t mk = h.bottom_count();
  std::vector<double> bottom(mk);
  std::vector<double> raw(mk);
  for (std::size_t t = 1; t <= n; ++t) {
    const double wave = season_wave(static_cast<long>(t), s);
    const double total = 120.0 + 25.0 * wave;
    double raw_sum = 0.0;
    for (std::size_t j = 0; j < mk; ++j) {
      raw[j] = 1.0 + 0.5 * season_wave(static_cast<long>(t) + 3 * static_cast<long>(j), s);
      raw_sum += raw[j];
    }
    for (std::size_t j = 0; j < mk; ++j)
      bottom[j] = (raw[j] / raw_sum) * total + rng.uniform(-3.0, 3.0);
    const auto full = hfr::aggregate_bottom(sm, bottom);
    for (std::size_t i = 0; i < h.m(); ++i)
      panel.values(i, static_cast<std::size_t>(t - 1)) = full[i];
  }
  return panel;
}

}  // namespace fixtures
