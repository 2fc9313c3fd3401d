#pragma once

#include <cmath>
#include <span>
#include <string>

#include "hfr/error.hpp"

namespace hfr {

namespace detail {

inline void check_metric_inputs(std::span<const double> actual, std::span<const double> forecast,
                                std::span<const double> insample, int s) {
  if (actual.size() != forecast.size())
    throw Error(errc::dimension_mismatch, "actual and forecast lengths differ");
  if (actual.empty()) throw Error(errc::dimension_mismatch, "empty horizon");
  if (s < 1) throw Error(errc::bad_format, "seasonal period must be >= 1");
  if (insample.size() <= static_cast<std::size_t>(s))
    throw Error(errc::zero_denominator,
                "in-sample window of " + std::to_string(insample.size()) +
                    " observations cannot scale with seasonal period " + std::to_string(s));
}

inline double seasonal_abs_sum(std::span<const double> insample, int s) {
  double acc = 0.0;
  for (std::size_t t = static_cast<std::size_t>(s); t < insample.size(); ++t)
    acc += std::abs(insample[t] - insample[t - static_cast<std::size_t>(s)]);
  return acc;
}

inline double seasonal_sq_sum(std::span<const double> insample, int s) {
  double acc = 0.0;
  for (std::size_t t = static_cast<std::size_t>(s); t < insample.size(); ++t) {
    const double d = insample[t] - insample[t - static_cast<std::size_t>(s)];
    acc += d * d;
  }
  return acc;
}

}  // namespace detail

// Scaled error metrics. All three divide by in-sample seasonal-naive errors
// and carry the (n - s) / h factor, so they are scale-independent and
// comparable across series. A series whose seasonal-naive errors are all
// zero has no scale: ZeroDenominator.

// MASE = (n-s)/h * sum |y - f| / sum_{t=s+1..n} |y_t - y_{t-s}|
inline double mase(std::span<const double> actual, std::span<const double> forecast,
                   std::span<const double> insample, int s) {
  detail::check_metric_inputs(actual, forecast, insample, s);
  const double denom = detail::seasonal_abs_sum(insample, s);
  if (denom == 0.0)
    throw Error(errc::zero_denominator, "series is constant with period " + std::to_string(s));
  double num = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) num += std::abs(actual[i] - forecast[i]);
  const double scale = static_cast<double>(insample.size() - static_cast<std::size_t>(s)) /
                       static_cast<double>(actual.size());
  return scale * num / denom;
}

// RMSSE = (n-s)/h * sqrt( sum (y - f)^2 / sum (y_t - y_{t-s})^2 )
inline double rmsse(std::span<const double> actual, std::span<const double> forecast,
                    std::span<const double> insample, int s) {
  detail::check_metric_inputs(actual, forecast, insample, s);
  const double denom = detail::seasonal_sq_sum(insample, s);
  if (denom == 0.0)
    throw Error(errc::zero_denominator, "series is constant with period " + std::to_string(s));
  double num = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - forecast[i];
    num += e * e;
  }
  const double scale = static_cast<double>(insample.size() - static_cast<std::size_t>(s)) /
                       static_cast<double>(actual.size());
  return scale * std::sqrt(num / denom);
}

// AMSE = (n-s)/h * |sum (y - f)| / sum |y_t - y_{t-s}|; signed errors cancel,
// so this measures bias rather than accuracy.
inline double amse(std::span<const double> actual, std::span<const double> forecast,
                   std::span<const double> insample, int s) {
  detail::check_metric_inputs(actual, forecast, insample, s);
  const double denom = detail::seasonal_abs_sum(insample, s);
  if (denom == 0.0)
    throw Error(errc::zero_denominator, "series is constant with period " + std::to_string(s));
  double num = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) num += actual[i] - forecast[i];
  const double scale = static_cast<double>(insample.size() - static_cast<std::size_t>(s)) /
                       static_cast<double>(actual.size());
  return scale * std::abs(num) / denom;
}

}  // namespace hfr
