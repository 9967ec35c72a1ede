#pragma once

// Trend prediction: monthly incident counts, a least-squares seasonal ARIMA
// forecaster and the trend report.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cesoforge/chrono.hpp"
#include "cesoforge/kdb.hpp"

namespace cesoforge::mltp {

struct TrendPoint {
    YearMonth month;
    std::int64_t count = 0;

    bool operator==(const TrendPoint&) const = default;
};

/// Contiguous, zero-filled months between the first and last match.
struct TrendSeries {
    std::vector<TrendPoint> points;
    kdb::QueryFilter filter;

    std::vector<double> values() const;
};

TrendSeries aggregate(const kdb::Store& store, const kdb::QueryFilter& filter);
TrendSeries zero_fill(const std::map<YearMonth, int>& counts);

/// (p,d,q)(P,D,Q)s. Seasonal and non-seasonal terms enter one additive
/// regression; the multiplicative cross lags are omitted.
struct ForecastConfig {
    int p = 1, d = 1, q = 0;
    int P = 0, D = 1, Q = 0;
    int s = 12;
    int horizon = 6;
    bool intercept = true;

    /// Throws PreconditionViolation.
    void check() const;
    std::size_t min_length() const;
};

struct Forecast {
    std::vector<double> point;  // clipped at 0
    std::vector<double> lo;
    std::vector<double> hi;
    double residual_std = 0;
    std::vector<double> coefficients;  // intercept, AR, seasonal AR, MA, seasonal MA
    std::vector<double> residuals;
};

/// Throws SeriesTooShort below `cfg.min_length()` points.
Forecast forecast(std::span<const double> series, const ForecastConfig& cfg);

struct ForecastPoint {
    YearMonth month;
    double value, lo, hi;
};
std::vector<ForecastPoint> forecast(const TrendSeries& series, const ForecastConfig& cfg);

struct TrendReport {
    std::string markdown;
    std::string csv;  // month,count,forecast,lo,hi
    TrendSeries series;
    kdb::Stats stats;
    std::vector<ForecastPoint> forecast;  // empty when unavailable
};

TrendReport trend_report(const kdb::Store& store, const kdb::QueryFilter& filter, const ForecastConfig& cfg,
                         std::size_t top = 10);

}  // namespace cesoforge::mltp
