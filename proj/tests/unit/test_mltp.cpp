#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "cesoforge/errors.hpp"
#include "cesoforge/mltp.hpp"

using namespace cesoforge;
using namespace cesoforge::mltp;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::not_found;
}

std::filesystem::path tmpdir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cesoforge-mltp-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

Breadcrumb crumb(std::string id, int y, unsigned m, std::vector<std::pair<TagCategory, std::string>> tags = {},
                 std::vector<TrainingTopic> topics = {}) {
    Breadcrumb b;
    b.article_id = std::move(id);
    b.name_tag = b.article_id;
    b.published = std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{1};
    b.tags.set_article_id(b.article_id);
    std::string text;
    for (const auto& [c, v] : tags) {
        const auto start = text.size();
        text += v + " ";
        b.tags.add({TagSpan{c, v, start, start + v.size(), TaggerKind::gazetteer}});
    }
    b.topics = std::move(topics);
    b.maturity = 60;
    return b;
}

ForecastConfig cfg_of(int p, int d, int q, int P, int D, int Q, int horizon = 12) {
    ForecastConfig c;
    c.p = p;
    c.d = d;
    c.q = q;
    c.P = P;
    c.D = D;
    c.Q = Q;
    c.horizon = horizon;
    return c;
}

}  // namespace

TEST_CASE("aggregation zero-fills between first and last month") {
    kdb::Store empty(tmpdir("empty"));
    CHECK(aggregate(empty, {}).points.empty());
    kdb::Store store(tmpdir("agg"));
    for (int i = 0; i < 3; ++i) store.put_breadcrumb(crumb("a" + std::to_string(i), 2021, 1));
    store.put_breadcrumb(crumb("b", 2021, 3));
    const auto s = aggregate(store, {});
    CHECK(s.points == std::vector<TrendPoint>{{{2021, 1}, 3}, {{2021, 2}, 0}, {{2021, 3}, 1}});
}

TEST_CASE("property: aggregation counts sum to the matching total") {
    std::mt19937_64 rng(3);
    kdb::Store store(tmpdir("sum"));
    for (int i = 0; i < 300; ++i) {
        const auto sector = rng() % 2 ? "energy" : "finance";
        store.put_breadcrumb(crumb("c" + std::to_string(i), 2020 + static_cast<int>(rng() % 3),
                                   1 + static_cast<unsigned>(rng() % 12), {{TagCategory::sector, sector}}));
    }
    for (const auto* sector : {"energy", "finance", "health"}) {
        kdb::QueryFilter f;
        f.sector = sector;
        const auto s = aggregate(store, f);
        std::int64_t total = 0;
        for (const auto& p : s.points) {
            total += p.count;
            CHECK(p.count >= 0);
        }
        CHECK(total == static_cast<std::int64_t>(store.query(f).size()));
        for (std::size_t i = 1; i < s.points.size(); ++i) CHECK(s.points[i - 1].month.next() == s.points[i].month);
    }
}

TEST_CASE("forecasts whose differenced series vanish are exact") {
    const std::vector<double> constant(24, 5.0);
    for (double v : forecast(constant, cfg_of(0, 1, 0, 0, 0, 0)).point) CHECK(std::abs(v - 5.0) <= 1e-9);

    std::vector<double> periodic;
    const double pattern[12]{3, 7, 1, 0, 4, 9, 2, 2, 8, 5, 6, 1};
    for (int i = 0; i < 36; ++i) periodic.push_back(pattern[i % 12]);
    const auto fp = forecast(periodic, cfg_of(0, 0, 0, 0, 1, 0, 24)).point;
    for (std::size_t h = 0; h < fp.size(); ++h) CHECK(std::abs(fp[h] - pattern[h % 12]) <= 1e-9);

    std::vector<double> ramp(24);
    std::iota(ramp.begin(), ramp.end(), 1.0);
    const auto fr = forecast(ramp, cfg_of(0, 2, 0, 0, 0, 0)).point;
    for (std::size_t h = 0; h < fr.size(); ++h) CHECK(std::abs(fr[h] - (25.0 + static_cast<double>(h))) <= 1e-9);
}

TEST_CASE("length and configuration preconditions") {
    const ForecastConfig def;
    CHECK(def.min_length() == 28);
    const std::vector<double> short_series(27, 1.0);
    CHECK(code_of([&] { forecast(short_series, def); }) == Errc::series_too_short);
    const std::vector<double> ok(28, 1.0);
    CHECK(forecast(ok, def).point.size() == 6);
    auto bad = def;
    bad.s = 1;
    CHECK(code_of([&] { forecast(ok, bad); }) == Errc::precondition_violation);
    bad = def;
    bad.horizon = 0;
    CHECK(code_of([&] { forecast(ok, bad); }) == Errc::precondition_violation);
    bad = def;
    bad.q = -1;
    CHECK(code_of([&] { forecast(ok, bad); }) == Errc::precondition_violation);
}

TEST_CASE("AR(1) coefficient recovery and residual centring") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x{10.0};
    for (int i = 1; i < 600; ++i) x.push_back(4.0 + 0.6 * x.back() + noise(rng));
    const auto f = forecast(x, cfg_of(1, 0, 0, 0, 0, 0));
    REQUIRE(f.coefficients.size() == 2);
    CHECK(std::abs(f.coefficients[0] - 4.0) < 0.6);
    CHECK(std::abs(f.coefficients[1] - 0.6) < 0.08);
    CHECK(std::abs(f.residual_std - 1.0) < 0.1);
}

TEST_CASE("property: pure-AR residuals are centred; forecasts never negative") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 30 + rng() % 40;
        std::vector<double> x;
        for (std::size_t i = 0; i < n; ++i) x.push_back(static_cast<double>(rng() % 20) * (trial % 4 == 0 ? -1.0 : 1.0));
        const auto p = static_cast<int>(rng() % 3);
        const auto f = forecast(x, cfg_of(p, 0, 0, 0, 0, 0));
        const double mean = std::accumulate(f.residuals.begin(), f.residuals.end(), 0.0) / static_cast<double>(f.residuals.size());
        CHECK(std::abs(mean) < 1e-6);
        ForecastConfig seasonal;
        seasonal.horizon = 12;
        for (const auto& g : {forecast(x, seasonal), forecast(x, cfg_of(1, 1, 1, 0, 0, 0))}) {
            for (std::size_t h = 0; h < g.point.size(); ++h) {
                CHECK(g.point[h] >= 0);
                CHECK(g.lo[h] >= 0);
                CHECK(g.lo[h] <= g.point[h]);
                CHECK(g.point[h] <= g.hi[h]);
                CHECK(std::isfinite(g.hi[h]));
            }
        }
    }
}

TEST_CASE("MA terms through the two-stage regression") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x;
    double prev_e = 0;
    for (int i = 0; i < 800; ++i) {
        const double e = noise(rng);
        x.push_back(20.0 + e + 0.5 * prev_e);
        prev_e = e;
    }
    const auto f = forecast(x, cfg_of(0, 0, 1, 0, 0, 0));
    REQUIRE(f.coefficients.size() == 2);
    CHECK(std::abs(f.coefficients[1] - 0.5) < 0.12);
    CHECK(f.point.size() == 12);
}

TEST_CASE("trend report composition") {
    kdb::Store empty(tmpdir("report-empty"));
    const auto none = trend_report(empty, {}, {});
    CHECK(none.markdown.find("## Monthly incidents\n\nInsufficient data.") != std::string::npos);
    CHECK(none.markdown.find("Forecast unavailable") != std::string::npos);
    CHECK(none.csv == "month,count,forecast,lo,hi\n");

    kdb::Store store(tmpdir("report"));
    std::mt19937_64 rng(14);
    for (int i = 0; i < 120; ++i) {
        const int month = static_cast<int>(rng() % 30);
        store.put_breadcrumb(crumb("r" + std::to_string(i), 2020 + month / 12, 1 + static_cast<unsigned>(month % 12),
                                   {{TagCategory::sector, "energy"},
                                    {TagCategory::attack_type, rng() % 2 ? "phishing" : "brute force"},
                                    {TagCategory::attacker_name, rng() % 3 ? "apt28" : "fin7"}},
                                   {TrainingTopic::phishing_social_engineering}));
    }
    store.put_breadcrumb(crumb("late", 2022, 6, {{TagCategory::sector, "finance"}}));
    kdb::QueryFilter f;
    f.sector = "energy";
    const auto r = trend_report(store, f, {});
    const auto stats = store.stats(f, 10);
    for (const auto* table : {&stats.top_attackers, &stats.top_techniques, &stats.topic_breakdown}) {
        for (const auto& [v, c] : *table) {
            CHECK(r.markdown.find("| " + v + " | " + std::to_string(c) + " |") != std::string::npos);
        }
    }
    CHECK(r.series.points.size() == r.stats.count_by_month.rbegin()->first.months_until(r.stats.count_by_month.begin()->first) * -1 + 1);
    CHECK(r.forecast.size() == 6);
    CHECK(r.markdown.find("## Forecast\n\n| Month") != std::string::npos);
    std::size_t lines = 0;
    for (char c : r.csv) lines += c == '\n';
    CHECK(lines == 1 + r.series.points.size() + 6);

    kdb::QueryFilter few;
    few.sector = "finance";
    const auto short_report = trend_report(store, few, {});
    CHECK(short_report.series.points.size() == 1);
    CHECK(short_report.markdown.find("Forecast unavailable: series has 1 points") != std::string::npos);
}
