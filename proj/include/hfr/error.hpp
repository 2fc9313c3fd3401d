#pragma once

#include <stdexcept>
#include <string>

namespace hfr {

// Error codes carried by every hfr exception. The CLI maps exception
// categories (ConfigError / DataError / Error) to distinct exit codes.
enum class errc {
  // hierarchy construction
  cycle_detected,
  multiple_roots,
  disconnected_node,
  invalid_edge,
  // panels and dimensions
  dimension_mismatch,
  incoherent_panel,
  unknown_node,
  missing_node,
  ragged_horizon,
  non_numeric_value,
  bad_format,
  // base forecasting
  insufficient_history,
  missing_regressor,
  // reconciliation
  zero_total,
  missing_residuals,
  singular_gram,
  invalid_level,
  // metrics / evaluation
  zero_denominator,
  config_infeasible,
  // ml
  empty_records,
  too_few_rows,
  model_count_mismatch,
  // io / config
  io_failure,
  bad_config,
  unknown_method,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::cycle_detected: return "CycleDetected";
    case errc::multiple_roots: return "MultipleRoots";
    case errc::disconnected_node: return "DisconnectedNode";
    case errc::invalid_edge: return "InvalidEdge";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::incoherent_panel: return "IncoherentPanel";
    case errc::unknown_node: return "UnknownNode";
    case errc::missing_node: return "MissingNode";
    case errc::ragged_horizon: return "RaggedHorizon";
    case errc::non_numeric_value: return "NonNumericValue";
    case errc::bad_format: return "BadFormat";
    case errc::insufficient_history: return "InsufficientHistory";
    case errc::missing_regressor: return "MissingRegressor";
    case errc::zero_total: return "ZeroTotal";
    case errc::missing_residuals: return "MissingResiduals";
    case errc::singular_gram: return "SingularGram";
    case errc::invalid_level: return "InvalidLevel";
    case errc::zero_denominator: return "ZeroDenominator";
    case errc::config_infeasible: return "ConfigInfeasible";
    case errc::empty_records: return "EmptyRecords";
    case errc::too_few_rows: return "TooFewRows";
    case errc::model_count_mismatch: return "ModelCountMismatch";
    case errc::io_failure: return "IoFailure";
    case errc::bad_config: return "BadConfig";
    case errc::unknown_method: return "UnknownMethod";
  }
  return "Unknown";
}

// Base exception: runtime/numeric failures.
class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

// Malformed or infeasible configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid input data or files (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace hfr
