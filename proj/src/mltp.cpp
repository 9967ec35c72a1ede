#include "cesoforge/mltp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Dense>

#include "cesoforge/errors.hpp"

namespace cesoforge::mltp {

namespace {

std::vector<double> diff(const std::vector<double>& y, int lag) {
    std::vector<double> out;
    for (std::size_t i = static_cast<std::size_t>(lag); i < y.size(); ++i) out.push_back(y[i] - y[i - lag]);
    return out;
}

struct Fit {
    std::vector<double> beta;
    std::vector<double> residuals;  // aligned with rows
    std::size_t first_row = 0;
};

// Least squares of w[t] on the given columns for t in [start, m).
Fit regress(const std::vector<double>& w, std::size_t start, bool intercept,
            const std::vector<std::pair<const std::vector<double>*, int>>& lags) {
    const std::size_t rows = w.size() - start;
    const std::size_t cols = (intercept ? 1 : 0) + lags.size();
    if (cols == 0) {
        Fit f;
        f.first_row = start;
        f.residuals.assign(w.begin() + static_cast<std::ptrdiff_t>(start), w.end());
        return f;
    }
    if (rows < cols + 1) {
        throw Error(Errc::series_too_short, "not enough differenced points to fit " + std::to_string(cols) + " terms");
    }
    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto t = start + r;
        std::size_t c = 0;
        if (intercept) X(r, c++) = 1.0;
        for (const auto& [series, lag] : lags) X(r, c++) = (*series)[t - lag];
        y(r) = w[t];
    }
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd res = y - X * beta;
    Fit f;
    f.first_row = start;
    f.beta.assign(beta.data(), beta.data() + beta.size());
    f.residuals.assign(res.data(), res.data() + res.size());
    return f;
}

std::string fixed2(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void ranked_table(std::ostringstream& md, const std::string& title, const kdb::Ranked& rows) {
    md << "### " << title << "\n\n";
    if (rows.empty()) {
        md << "Insufficient data.\n\n";
        return;
    }
    md << "| Value | Count |\n|---|---|\n";
    for (const auto& [v, c] : rows) md << "| " << v << " | " << c << " |\n";
    md << "\n";
}

}  // namespace

std::vector<double> TrendSeries::values() const {
    std::vector<double> out;
    for (const auto& p : points) out.push_back(static_cast<double>(p.count));
    return out;
}

TrendSeries zero_fill(const std::map<YearMonth, int>& counts) {
    TrendSeries s;
    if (counts.empty()) return s;
    const auto last = counts.rbegin()->first;
    for (auto m = counts.begin()->first; m <= last; m = m.next()) {
        const auto it = counts.find(m);
        s.points.push_back({m, it == counts.end() ? 0 : it->second});
    }
    return s;
}

TrendSeries aggregate(const kdb::Store& store, const kdb::QueryFilter& filter) {
    auto s = zero_fill(store.stats(filter).count_by_month);
    s.filter = filter;
    return s;
}

void ForecastConfig::check() const {
    if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0) {
        throw Error(Errc::precondition_violation, "model orders must be non-negative");
    }
    if (s < 2) throw Error(Errc::precondition_violation, "seasonal period must be at least 2");
    if (horizon < 1) throw Error(Errc::precondition_violation, "horizon must be at least 1");
}

std::size_t ForecastConfig::min_length() const {
    return static_cast<std::size_t>(s + d + D * s + p + P * s + q + Q * s + 2);
}

Forecast forecast(std::span<const double> series, const ForecastConfig& cfg) {
    cfg.check();
    if (series.size() < cfg.min_length()) {
        throw Error(Errc::series_too_short, "series has " + std::to_string(series.size()) + " points, at least " +
                                                std::to_string(cfg.min_length()) + " needed");
    }
    // Differencing stages, kept for inversion.
    std::vector<std::pair<std::vector<double>, int>> stages;
    std::vector<double> w(series.begin(), series.end());
    for (int i = 0; i < cfg.d; ++i) {
        stages.emplace_back(w, 1);
        w = diff(w, 1);
    }
    for (int i = 0; i < cfg.D; ++i) {
        stages.emplace_back(w, cfg.s);
        w = diff(w, cfg.s);
    }
    const std::size_t m = w.size();

    std::vector<int> ar_lags, ma_lags;
    for (int i = 1; i <= cfg.p; ++i) ar_lags.push_back(i);
    for (int i = 1; i <= cfg.P; ++i) ar_lags.push_back(i * cfg.s);
    for (int i = 1; i <= cfg.q; ++i) ma_lags.push_back(i);
    for (int i = 1; i <= cfg.Q; ++i) ma_lags.push_back(i * cfg.s);
    int max_lag = 0;
    for (int l : ar_lags) max_lag = std::max(max_lag, l);
    for (int l : ma_lags) max_lag = std::max(max_lag, l);

    // Hannan-Rissanen stage one: a long AR supplies innovation estimates.
    std::vector<double> innovations(m, 0.0);
    std::size_t start = static_cast<std::size_t>(max_lag);
    if (!ma_lags.empty()) {
        const int long_order = 2 * max_lag;
        if (m < static_cast<std::size_t>(2 * long_order + 3)) {
            throw Error(Errc::series_too_short, "not enough points for the long autoregression of the MA fit");
        }
        std::vector<std::pair<const std::vector<double>*, int>> cols;
        for (int l = 1; l <= long_order; ++l) cols.emplace_back(&w, l);
        const auto pre = regress(w, static_cast<std::size_t>(long_order), cfg.intercept, cols);
        for (std::size_t i = 0; i < pre.residuals.size(); ++i) innovations[pre.first_row + i] = pre.residuals[i];
        start = static_cast<std::size_t>(long_order + max_lag);
    }

    std::vector<std::pair<const std::vector<double>*, int>> cols;
    for (int l : ar_lags) cols.emplace_back(&w, l);
    for (int l : ma_lags) cols.emplace_back(&innovations, l);
    const auto fit = regress(w, start, cfg.intercept, cols);

    Forecast out;
    out.coefficients = fit.beta;
    out.residuals = fit.residuals;
    double ss = 0;
    for (double r : fit.residuals) ss += r * r;
    const auto dof = fit.residuals.size() > fit.beta.size() ? fit.residuals.size() - fit.beta.size() : fit.residuals.size();
    out.residual_std = dof > 0 ? std::sqrt(ss / static_cast<double>(dof)) : 0.0;

    std::vector<double> errors(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) errors[i] = innovations[i];
    for (std::size_t i = 0; i < fit.residuals.size(); ++i) errors[fit.first_row + i] = fit.residuals[i];

    for (int h = 0; h < cfg.horizon; ++h) {
        const std::size_t t = w.size();
        double v = 0;
        std::size_t c = 0;
        if (cfg.intercept && !fit.beta.empty()) v += fit.beta[c++];
        if (!fit.beta.empty()) {
            for (int l : ar_lags) v += fit.beta[c++] * w[t - l];
            for (int l : ma_lags) v += fit.beta[c++] * errors[t - l];
        }
        w.push_back(v);
        errors.push_back(0.0);
    }
    // Undo the differencing, innermost stage first.
    std::vector<double> y = w;
    for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
        auto prev = it->first;
        const auto lag = static_cast<std::size_t>(it->second);
        for (std::size_t k = prev.size() - lag; k < y.size(); ++k) prev.push_back(y[k] + prev[k]);
        y = std::move(prev);
    }
    const double half = 1.96 * out.residual_std;
    for (std::size_t k = series.size(); k < y.size(); ++k) {
        const double v = y[k];
        out.point.push_back(std::max(0.0, v));
        out.lo.push_back(std::max(0.0, v - half));
        out.hi.push_back(std::max(0.0, v + half));
    }
    return out;
}

std::vector<ForecastPoint> forecast(const TrendSeries& series, const ForecastConfig& cfg) {
    const auto values = series.values();
    const auto f = forecast(values, cfg);
    std::vector<ForecastPoint> out;
    auto month = series.points.back().month;
    for (std::size_t i = 0; i < f.point.size(); ++i) {
        month = month.next();
        out.push_back({month, f.point[i], f.lo[i], f.hi[i]});
    }
    return out;
}

TrendReport trend_report(const kdb::Store& store, const kdb::QueryFilter& filter, const ForecastConfig& cfg,
                         std::size_t top) {
    TrendReport r;
    r.stats = store.stats(filter, top);
    r.series = zero_fill(r.stats.count_by_month);
    r.series.filter = filter;

    std::string unavailable;
    try {
        if (r.series.points.empty()) throw Error(Errc::series_too_short, "no matching breadcrumbs");
        r.forecast = forecast(r.series, cfg);
    } catch (const Error& e) {
        if (e.code() != Errc::series_too_short) throw;
        unavailable = e.what();
    }

    std::ostringstream md;
    md << "# Trend report\n\n";
    md << "- Filter: `" << filter.to_json().dump() << "`\n";
    md << "- Matching breadcrumbs: " << r.stats.matched << "\n";
    md << "- Model: SARIMA(" << cfg.p << "," << cfg.d << "," << cfg.q << ")(" << cfg.P << "," << cfg.D << ","
       << cfg.Q << ")" << cfg.s << ", horizon " << cfg.horizon << " months\n\n";

    md << "## Training objectives\n\n";
    if (r.stats.topic_breakdown.empty()) {
        md << "Insufficient data.\n\n";
    } else {
        md << "| Topic | Breadcrumbs |\n|---|---|\n";
        for (const auto& [t, c] : r.stats.topic_breakdown) md << "| " << t << " | " << c << " |\n";
        md << "\n";
    }

    md << "## Top entities\n\n";
    ranked_table(md, "Attackers", r.stats.top_attackers);
    ranked_table(md, "Techniques", r.stats.top_techniques);
    ranked_table(md, "Malware", r.stats.top_malware);
    ranked_table(md, "Vulnerabilities", r.stats.top_vulnerabilities);

    md << "## Monthly incidents\n\n";
    if (r.series.points.empty()) {
        md << "Insufficient data.\n\n";
    } else {
        md << "| Month | Count |\n|---|---|\n";
        for (const auto& p : r.series.points) md << "| " << p.month.str() << " | " << p.count << " |\n";
        md << "\n";
    }

    md << "## Forecast\n\n";
    if (r.forecast.empty()) {
        md << "Forecast unavailable: " << unavailable << ".\n";
    } else {
        md << "| Month | Forecast | Low | High |\n|---|---|---|---|\n";
        for (const auto& f : r.forecast) {
            md << "| " << f.month.str() << " | " << fixed2(f.value) << " | " << fixed2(f.lo) << " | " << fixed2(f.hi)
               << " |\n";
        }
    }
    r.markdown = md.str();

    std::ostringstream csv;
    csv << "month,count,forecast,lo,hi\n";
    for (const auto& p : r.series.points) csv << p.month.str() << "," << p.count << ",,,\n";
    for (const auto& f : r.forecast) {
        csv << f.month.str() << ",," << fixed2(f.value) << "," << fixed2(f.lo) << "," << fixed2(f.hi) << "\n";
    }
    r.csv = csv.str();
    return r;
}

}  // namespace cesoforge::mltp
