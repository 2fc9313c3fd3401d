#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hfr/csv.hpp"
#include "hfr/error.hpp"
#include "hfr/forecast.hpp"
#include "hfr/hierarchy.hpp"
#include "hfr/matrix.hpp"
#include "hfr/series.hpp"

namespace hfr {

namespace detail {

inline double parse_finite(std::string_view text, const std::string& context) {
  const double v = parse_double(text, context);
  if (!std::isfinite(v))
    throw DataError(errc::non_numeric_value, "non-finite value '" + std::string(text) + "' (" +
                                                 context + ")");
  return v;
}

}  // namespace detail

// Hierarchy CSV: header `parent_id,child_id`, one edge per row.
inline Hierarchy load_hierarchy_csv(const std::filesystem::path& path) {
  const CsvFile file = read_csv(path);
  expect_header(file, {"parent_id", "child_id"}, path.string());
  std::vector<std::pair<std::string, std::string>> edges;
  edges.reserve(file.rows.size());
  for (std::size_t r = 0; r < file.rows.size(); ++r) {
    if (file.rows[r].size() != 2)
      throw DataError(errc::bad_format,
                      path.string() + " row " + std::to_string(r + 2) + ": expected 2 fields");
    edges.emplace_back(file.rows[r][0], file.rows[r][1]);
  }
  return Hierarchy::from_edges(edges);
}

// Series CSV: first column `t` (1-based period index), one column per node;
// the column set must equal the hierarchy's node ids exactly. Rows are
// reordered into hierarchy node order.
inline SeriesPanel load_series_csv(const std::filesystem::path& path, const Hierarchy& h,
                                   int seasonal_period) {
  const CsvFile file = read_csv(path);
  if (file.header.empty() || file.header[0] != "t")
    throw DataError(errc::bad_format, path.string() + ": first column must be 't'");
  const std::size_t m = h.m();
  if (file.header.size() != m + 1) {
    std::set<std::string> present(file.header.begin() + 1, file.header.end());
    for (const auto& node : h.nodes())
      if (!present.count(node.id))
        throw DataError(errc::missing_node, path.string() + ": no column for node '" + node.id + "'");
    throw DataError(errc::unknown_node,
                    path.string() + ": expected " + std::to_string(m) + " node columns, found " +
                        std::to_string(file.header.size() - 1));
  }
  std::vector<std::size_t> column_of(m);  // hierarchy index -> csv column
  {
    std::map<std::string, std::size_t> where;
    for (std::size_t c = 1; c < file.header.size(); ++c) {
      if (!where.emplace(file.header[c], c).second)
        throw DataError(errc::bad_format, path.string() + ": duplicate column '" + file.header[c] + "'");
      if (h.node_index(file.header[c]) < 0)
        throw DataError(errc::unknown_node,
                        path.string() + ": column '" + file.header[c] + "' is not a hierarchy node");
    }
    for (std::size_t i = 0; i < m; ++i) {
      auto it = where.find(h.nodes()[i].id);
      if (it == where.end())
        throw DataError(errc::missing_node,
                        path.string() + ": no column for node '" + h.nodes()[i].id + "'");
      column_of[i] = it->second;
    }
  }
  const std::size_t n = file.rows.size();
  SeriesPanel panel;
  panel.node_ids = h.node_ids();
  panel.seasonal_period = seasonal_period;
  panel.values = Matrix(m, n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = file.rows[r];
    if (row.size() != m + 1)
      throw DataError(errc::bad_format,
                      path.string() + " row " + std::to_string(r + 2) + ": wrong field count");
    const long t = parse_long(row[0], path.string() + " column t");
    if (t != static_cast<long>(r) + 1)
      throw DataError(errc::bad_format, path.string() + ": period index " + std::to_string(t) +
                                            " out of order at row " + std::to_string(r + 2));
    for (std::size_t i = 0; i < m; ++i)
      panel.values(i, r) =
          detail::parse_finite(row[column_of[i]], path.string() + " row " + std::to_string(r + 2));
  }
  return panel;
}

// Regressor CSV: same shape as the series CSV but with arbitrary column
// ids; may contain more rows than the panel (future values).
inline std::map<std::string, std::vector<double>> load_regressor_csv(
    const std::filesystem::path& path) {
  const CsvFile file = read_csv(path);
  if (file.header.empty() || file.header[0] != "t")
    throw DataError(errc::bad_format, path.string() + ": first column must be 't'");
  std::map<std::string, std::vector<double>> out;
  for (std::size_t c = 1; c < file.header.size(); ++c)
    if (!out.emplace(file.header[c], std::vector<double>{}).second)
      throw DataError(errc::bad_format, path.string() + ": duplicate column '" + file.header[c] + "'");
  for (std::size_t r = 0; r < file.rows.size(); ++r) {
    const auto& row = file.rows[r];
    if (row.size() != file.header.size())
      throw DataError(errc::bad_format,
                      path.string() + " row " + std::to_string(r + 2) + ": wrong field count");
    for (std::size_t c = 1; c < file.header.size(); ++c)
      out[file.header[c]].push_back(
          detail::parse_finite(row[c], path.string() + " row " + std::to_string(r + 2)));
  }
  return out;
}

// Forecast CSV: `node_id,step,value` with steps 1..h and exactly m*h rows.
inline ForecastPanel load_forecast_csv(const std::filesystem::path& path, const Hierarchy& h,
                                       long origin) {
  const CsvFile file = read_csv(path);
  expect_header(file, {"node_id", "step", "value"}, path.string());
  const std::size_t m = h.m();
  long max_step = 0;
  for (std::size_t r = 0; r < file.rows.size(); ++r) {
    if (file.rows[r].size() != 3)
      throw DataError(errc::bad_format,
                      path.string() + " row " + std::to_string(r + 2) + ": expected 3 fields");
    max_step = std::max(max_step, parse_long(file.rows[r][1], "step"));
  }
  if (max_step < 1) throw DataError(errc::bad_format, path.string() + ": no steps");
  const auto horizon = static_cast<std::size_t>(max_step);

  ForecastPanel panel;
  panel.node_ids = h.node_ids();
  panel.origin = origin;
  panel.values = Matrix(m, horizon);
  panel.fallback.assign(m, 0);
  Matrix seen(m, horizon);
  for (const auto& row : file.rows) {
    const int node = h.node_index(row[0]);
    if (node < 0)
      throw DataError(errc::unknown_node, path.string() + ": '" + row[0] + "' is not a hierarchy node");
    const long step = parse_long(row[1], "step");
    if (step < 1 || step > max_step)
      throw DataError(errc::ragged_horizon,
                      path.string() + ": step " + std::to_string(step) + " outside 1.." +
                          std::to_string(max_step));
    auto& mark = seen(static_cast<std::size_t>(node), static_cast<std::size_t>(step - 1));
    if (mark != 0.0)
      throw DataError(errc::ragged_horizon, path.string() + ": duplicate (node '" + row[0] +
                                                "', step " + std::to_string(step) + ")");
    mark = 1.0;
    panel.values(static_cast<std::size_t>(node), static_cast<std::size_t>(step - 1)) =
        detail::parse_finite(row[2], path.string() + " node '" + row[0] + "'");
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < horizon; ++t)
      if (seen(i, t) == 0.0) {
        bool any = false;
        for (std::size_t tt = 0; tt < horizon; ++tt) any = any || seen(i, tt) != 0.0;
        if (!any)
          throw DataError(errc::missing_node,
                          path.string() + ": no rows for node '" + h.nodes()[i].id + "'");
        throw DataError(errc::ragged_horizon, path.string() + ": node '" + h.nodes()[i].id +
                                                  "' is missing step " + std::to_string(t + 1));
      }
  return panel;
}

inline std::string forecast_csv(const ForecastPanel& panel) {
  std::string out = "node_id,step,value\n";
  for (std::size_t i = 0; i < panel.m(); ++i)
    for (std::size_t t = 0; t < panel.horizon(); ++t) {
      out += panel.node_ids[i];
      out += ',';
      out += std::to_string(t + 1);
      out += ',';
      out += format_double(panel.values(i, t));
      out += '\n';
    }
  return out;
}

inline void write_forecast_csv(const ForecastPanel& panel, const std::filesystem::path& path) {
  atomic_write_file(path, forecast_csv(panel));
}

// Rolling-record CSV: `origin,node_id,forecast,actual`; the actual column is
// filled for bottom nodes only.
inline void write_records_csv(const std::vector<RollingOneStepRecord>& records,
                              const Hierarchy& h, const std::filesystem::path& path) {
  std::string out = "origin,node_id,forecast,actual\n";
  for (const auto& rec : records)
    for (std::size_t x = 0; x < rec.forecasts.size(); ++x) {
      out += std::to_string(rec.origin);
      out += ',';
      out += h.nodes()[x].id;
      out += ',';
      out += format_double(rec.forecasts[x]);
      out += ',';
      const int j = h.bottom_order(static_cast<int>(x));
      if (j >= 0) out += format_double(rec.actual_bottom[static_cast<std::size_t>(j)]);
      out += '\n';
    }
  atomic_write_file(path, out);
}

// Audit export for G and W matrices: `row,col,value`.
inline void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::string out = "row,col,value\n";
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(j);
      out += ',';
      out += format_double(m(i, j));
      out += '\n';
    }
  atomic_write_file(path, out);
}

}  // namespace hfr
