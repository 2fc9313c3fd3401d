#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "hfr/hierarchy.hpp"
#include "hfr/matrix.hpp"

namespace hfr {

// Aligned panel of observed series, rows in hierarchy node order.
// Observed data must itself be coherent: aggregate rows are rejected if
// they do not equal the sum of their children (validate_panel).
struct SeriesPanel {
  std::vector<std::string> node_ids;
  Matrix values;            // m x n
  int seasonal_period = 1;  // s
  // Exogenous regressors by id; length may exceed n when future values are
  // provided for forecasting.
  std::map<std::string, std::vector<double>> regressors;

  std::size_t m() const { return values.rows(); }
  std::size_t n() const { return values.cols(); }
  std::span<const double> row(std::size_t i) const { return values.row(i); }
};

// Checks ordering against the hierarchy, n > 2s, and coherence of the
// observations at every period (relative tolerance 1e-9).
inline void validate_panel(const SeriesPanel& panel, const Hierarchy& h, const SummingMatrix& s) {
  if (panel.node_ids.size() != h.m() || panel.values.rows() != h.m())
    throw DataError(errc::dimension_mismatch,
                    "panel has " + std::to_string(panel.node_ids.size()) + " series, hierarchy has " +
                        std::to_string(h.m()));
  for (std::size_t i = 0; i < h.m(); ++i)
    if (panel.node_ids[i] != h.nodes()[i].id)
      throw DataError(errc::unknown_node, "panel row " + std::to_string(i) + " is '" +
                                              panel.node_ids[i] + "', expected '" + h.nodes()[i].id +
                                              "'");
  if (panel.seasonal_period < 1)
    throw DataError(errc::bad_format, "seasonal period must be >= 1");
  if (panel.n() <= 2 * static_cast<std::size_t>(panel.seasonal_period))
    throw DataError(errc::bad_format,
                    "need n > 2s observations: n = " + std::to_string(panel.n()) + ", s = " +
                        std::to_string(panel.seasonal_period));
  std::vector<double> column(h.m());
  for (std::size_t t = 0; t < panel.n(); ++t) {
    for (std::size_t i = 0; i < h.m(); ++i) column[i] = panel.values(i, t);
    if (!coherence_check(s, column, 1e-9))
      throw DataError(errc::incoherent_panel,
                      "observations at t = " + std::to_string(t + 1) + " do not add up");
  }
  for (const auto& [id, values] : panel.regressors)
    if (values.size() < panel.n())
      throw DataError(errc::bad_format, "regressor '" + id + "' shorter than the panel");
}

}  // namespace hfr
