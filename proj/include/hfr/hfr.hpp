#pragma once

// Hierarchical time-series forecast reconciliation: classical combiners
// (bottom-up, top-down, middle-out, minimum-trace) and per-bottom-series
// tree-ensemble combiners trained on rolling one-step base forecasts, plus
// the scaled-error metrics and rolling-origin evaluation harness used to
// compare them.

#include "hfr/covariance.hpp"
#include "hfr/csv.hpp"
#include "hfr/ensemble.hpp"
#include "hfr/error.hpp"
#include "hfr/evaluate.hpp"
#include "hfr/forecast.hpp"
#include "hfr/hierarchy.hpp"
#include "hfr/io.hpp"
#include "hfr/matrix.hpp"
#include "hfr/metrics.hpp"
#include "hfr/ml_reconcile.hpp"
#include "hfr/reconcile.hpp"
#include "hfr/rng.hpp"
#include "hfr/series.hpp"
#include "hfr/training_table.hpp"
#include "hfr/tree.hpp"
#include "hfr/tuning.hpp"
#include "hfr/version.hpp"
