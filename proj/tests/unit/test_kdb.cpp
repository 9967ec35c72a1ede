#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cesoforge/errors.hpp"
#include "cesoforge/kdb.hpp"

using namespace cesoforge;
using namespace cesoforge::kdb;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cesoforge_kdb_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    return p;
}

TagSpan span(TagCategory c, std::string text) {
    return TagSpan{c, std::move(text), 0, 0, TaggerKind::gazetteer};
}

Breadcrumb crumb(std::string id, std::string date, int maturity, std::vector<TagSpan> spans,
                 std::vector<TrainingTopic> topics = {}) {
    Breadcrumb b;
    b.article_id = std::move(id);
    b.name_tag = b.article_id;
    b.published = *parse_date(date);
    // Distinct offsets keep spans from collapsing.
    for (std::size_t i = 0; i < spans.size(); ++i) {
        spans[i].start = i * 100;
        spans[i].end = i * 100 + spans[i].text.size();
    }
    b.tags = TagSet(b.article_id, std::move(spans));
    b.maturity = maturity;
    b.topics = std::move(topics);
    return b;
}

}  // namespace

TEST_CASE("articles persist across reopen and upsert by dedup key") {
    const auto dir = fresh_dir("articles");
    ArticleRecord a;
    a.source = "feed";
    a.url = "https://news.example/1";
    a.published = *parse_date("2021-03-01");
    a.raw_text = "Raw";
    a.normalized_text = "raw";
    std::string id;
    {
        Store s(dir);
        id = s.put_article(a);
        a.raw_text = "Raw updated";
        CHECK(s.put_article(a) == id);
        CHECK(s.articles().size() == 1);
    }
    Store reopened(dir);
    REQUIRE(reopened.article(id).has_value());
    CHECK(reopened.article(id)->raw_text == "Raw updated");

    ArticleRecord blank = a;
    blank.raw_text = " \n";
    try {
        reopened.put_article(blank);
        FAIL("expected ValidationError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::validation_error);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("torn trailing line is skipped, corruption elsewhere fails") {
    const auto dir = fresh_dir("torn");
    {
        Store s(dir);
        s.put_breadcrumb(crumb("art-1", "2021-01-01", 50, {span(TagCategory::sector, "energy")}));
    }
    {
        std::ofstream(dir / Store::kBreadcrumbs, std::ios::app) << "{\"article_id\":\"art-";
    }
    Store s(dir);
    CHECK(s.breadcrumb("art-1").has_value());
    // A later append puts the torn line in the middle of the file.
    std::ofstream(dir / Store::kBreadcrumbs, std::ios::app)
        << "\n" << to_json(crumb("art-2", "2021-01-01", 0, {})).dump() << "\n";
    try {
        Store broken(dir);
        FAIL("expected StorageFailure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::storage_failure);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("query filters and ordering") {
    const auto dir = fresh_dir("query");
    Store s(dir);
    s.put_breadcrumb(crumb("art-a", "2021-01-10", 70,
                           {span(TagCategory::sector, "energy"), span(TagCategory::attack_type, "phishing"),
                            span(TagCategory::malware_name, "qbot")},
                           {TrainingTopic::phishing_social_engineering}));
    s.put_breadcrumb(crumb("art-b", "2021-02-10", 70,
                           {span(TagCategory::sector, "Energy"), span(TagCategory::malware_name, "qbot")}));
    s.put_breadcrumb(crumb("art-c", "2021-02-11", 20, {span(TagCategory::attacker_name, "apt28")}));

    auto all = s.query({});
    REQUIRE(all.size() == 3);
    CHECK(all[0].article_id == "art-b");  // same maturity, newer first
    CHECK(all[1].article_id == "art-a");
    CHECK(all[2].article_id == "art-c");

    QueryFilter f;
    f.sector = "energy";
    CHECK(s.query(f).size() == 2);
    f.attack_type = "Phishing";
    CHECK(s.query(f).size() == 1);

    QueryFilter g;
    g.from = parse_date("2021-02-01");
    g.min_maturity = 50;
    CHECK(s.query(g).size() == 1);

    QueryFilter t;
    t.tags = {"qbot", "energy"};
    CHECK(s.query(t).size() == 2);
    t.topic = TrainingTopic::phishing_social_engineering;
    CHECK(s.query(t).size() == 1);

    const auto st = s.stats({});
    CHECK(st.matched == 3);
    CHECK(st.count_by_month.at(YearMonth{2021, 2}) == 2);
    REQUIRE(!st.top_malware.empty());
    CHECK(st.top_malware[0] == std::pair<std::string, int>{"qbot", 2});
    CHECK(st.top_attackers[0].first == "apt28");
    std::filesystem::remove_all(dir);
}

TEST_CASE("filter json validation") {
    const auto f = QueryFilter::from_json({{"sector", "energy"}, {"from", "2021-01-01"}, {"min_maturity", "50"},
                                           {"topic", "gdpr"}});
    CHECK(f.sector == "energy");
    CHECK(f.min_maturity == 50);
    CHECK(f.topic == TrainingTopic::gdpr);
    CHECK(QueryFilter::from_json(f.to_json()).to_json() == f.to_json());
    CHECK_THROWS_AS(QueryFilter::from_json({{"from", "yesterday"}}), Error);
    CHECK_THROWS_AS(QueryFilter::from_json({{"topic", "astrology"}}), Error);
}

TEST_CASE("top_k ordering") {
    const std::map<std::string, int> counts{{"b", 2}, {"a", 2}, {"c", 5}, {"d", 1}};
    const auto top = top_k(counts, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].first == "c");
    CHECK(top[1].first == "a");
    CHECK(top[2].first == "b");
}

TEST_CASE("incidents and profiles") {
    const auto dir = fresh_dir("incidents");
    {
        Store s(dir);
        StoredIncident a;
        a.id = "incident-1";
        a.name_tag = "qbot";
        a.created = start_of_day(*parse_date("2022-01-01"));
        s.put_incident(a);
        StoredIncident b = a;
        b.id = "incident-2";
        s.put_incident(b);

        AptProfile p;
        p.group_id = "intrusion-set--11111111-1111-4111-8111-111111111111";
        p.name = "APT28";
        p.aliases = {"Fancy Bear"};
        s.put_profile(p);
    }
    Store s(dir);
    CHECK(s.incidents().size() == 2);
    CHECK(s.incident_by_name("qbot")->id == "incident-2");
    CHECK(s.profile("fancy bear").has_value());
    CHECK(s.profile("apt28")->aliases.size() == 1);
    CHECK_FALSE(s.profile("apt99").has_value());
    std::filesystem::remove_all(dir);
}

TEST_CASE("data dir resolution") {
    CHECK(resolve_data_dir(std::string("/x")) == "/x");
    ::setenv("CESOFORGE_DATA", "/from-env", 1);
    CHECK(resolve_data_dir(std::nullopt) == "/from-env");
    ::unsetenv("CESOFORGE_DATA");
    CHECK(resolve_data_dir(std::nullopt) == "kdb");
}
