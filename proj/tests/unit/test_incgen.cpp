#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "cesoforge/errors.hpp"
#include "cesoforge/incgen.hpp"

using namespace cesoforge;
using namespace cesoforge::incgen;

namespace {

const tagger::Resources& resources() {
    static const tagger::Resources r = tagger::Resources::load(CESOFORGE_RESOURCE_DIR);
    return r;
}

Breadcrumb crumb(std::string id, std::string text, Date published, ceso::IdFactory& ids) {
    ArticleRecord a;
    a.id = std::move(id);
    a.source = "test";
    a.name_tag = a.id.substr(4);
    a.published = published;
    a.normalized_text = std::move(text);
    a.raw_text = a.normalized_text;
    const auto tags = tagger::tag_text(a.normalized_text, resources().gazetteers, a.id);
    return tagger::to_breadcrumb(a, tags, resources(), ids);
}

const char* kQbot = "qbot malware dropped via context aware phishing campaign infects the energy sector";
const char* kFull =
    "russian apt28 hackers used spearphishing to deliver a backdoor exploiting log4shell against "
    "windows servers in the energy sector";

Date ymd(int y, unsigned m, unsigned d) {
    return std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d};
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::not_found;
}

std::filesystem::path tmpdir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cesoforge-incgen-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

bool root_reaches_all(const IncidentDraft& d) {
    std::set<std::string> seen{d.root};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [_, r] : d.graph.relationships()) {
            const bool s = seen.contains(r.source), t = seen.contains(r.target);
            if (s != t) {
                seen.insert(s ? r.target : r.source);
                grew = true;
            }
        }
    }
    return seen.size() == d.graph.objects().size();
}

}  // namespace

TEST_CASE("mature article drafts an intrusion-set rooted incident with one inject") {
    ceso::IdFactory ids(1);
    const auto b = crumb("art-qbot", kQbot, ymd(2022, 1, 10), ids);
    REQUIRE(b.maturity == 70);
    const auto d = draft_from_breadcrumb(b, ids);
    CHECK(d.graph.of_kind(ceso::ObjectKind::intrusion_set).size() == 1);
    CHECK(d.graph.kind_of(d.root) == ceso::ObjectKind::intrusion_set);
    const auto aps = d.graph.of_kind(ceso::ObjectKind::attack_pattern);
    REQUIRE(aps.size() == 1);
    REQUIRE(d.injects.size() == 1);
    CHECK(d.injects[0].timing_offset == 30);
    CHECK(d.injects[0].difficulty == 3);
    CHECK(d.injects[0].carriers.front() == aps[0]->id);
    CHECK(d.injects[0].carriers.back() == d.injects[0].course_of_action);
    CHECK(d.graph.has_edge(d.injects[0].course_of_action, aps[0]->id, ceso::RelType::mitigates));
    CHECK(d.graph.has_edge(d.root, aps[0]->id, ceso::RelType::uses));
    CHECK_FALSE(d.low_maturity);
    CHECK(untraced_objects(d.graph).empty());
    CHECK(root_reaches_all(d));
}

TEST_CASE("immature sources are refused unless overridden") {
    ceso::IdFactory ids(2);
    const auto b = crumb("art-weak", "phishing emails hit the energy sector", ymd(2022, 1, 10), ids);
    REQUIRE(b.maturity == 45);
    CHECK(code_of([&] { draft_from_breadcrumb(b, ids); }) == Errc::immature_source);
    DraftOptions opt;
    opt.allow_immature = true;
    const auto d = draft_from_breadcrumb(b, ids, opt);
    CHECK(d.low_maturity);
    CHECK(render_report(d).find("below threshold") != std::string::npos);
}

TEST_CASE("full article wires vulnerabilities into the inject") {
    ceso::IdFactory ids(3);
    const auto b = crumb("art-full", kFull, ymd(2022, 2, 1), ids);
    CHECK(b.maturity >= 150);
    const auto d = draft_from_breadcrumb(b, ids);
    const auto vulns = d.graph.of_kind(ceso::ObjectKind::vulnerability);
    REQUIRE(vulns.size() == 1);
    REQUIRE_FALSE(d.injects.empty());
    bool mitigated = false;
    for (const auto& inj : d.injects) mitigated |= d.graph.has_edge(inj.course_of_action, vulns[0]->id, ceso::RelType::mitigates);
    CHECK(mitigated);
    CHECK(root_reaches_all(d));
    // Non-standard edges only ever leave the root.
    for (const auto& [_, r] : d.graph.relationships()) {
        if (r.nonstandard) CHECK(r.source == d.root);
    }
}

TEST_CASE("no attack patterns yields a report that states there are no injects") {
    ceso::IdFactory ids(4);
    ArticleRecord a{"art-x", "t", std::nullopt, ymd(2022, 1, 1), "", "", "x"};
    auto tags = tagger::tag_text("ransomware hits the energy sector", resources().gazetteers, a.id);
    auto b = tagger::to_breadcrumb(a, tags, resources(), ids);
    DraftOptions opt;
    opt.allow_immature = true;
    const auto d = draft_from_breadcrumb(b, ids, opt);
    CHECK(d.injects.empty());
    CHECK(render_report(d).find("## Injects\n\nNo injects") != std::string::npos);
}

TEST_CASE("query drafting: ordering, saturation and empty stores") {
    const auto dir = tmpdir("query");
    kdb::Store store(dir);
    ceso::IdFactory ids(5);
    CHECK(code_of([&] { draft_from_query(store, {}, 1, ids); }) == Errc::no_candidates);
    store.put_breadcrumb(crumb("art-a", kQbot, ymd(2021, 5, 1), ids));
    store.put_breadcrumb(crumb("art-b", kFull, ymd(2021, 6, 1), ids));
    store.put_breadcrumb(crumb("art-c", "phishing emails hit the energy sector", ymd(2022, 3, 1), ids));
    CHECK(code_of([&] { draft_from_query(store, {}, 0, ids); }) == Errc::precondition_violation);
    const auto two = draft_from_query(store, {}, 5, ids);
    REQUIRE(two.size() == 2);
    CHECK(two[0].provenance == std::vector<std::string>{"art-b"});
    CHECK(two[1].provenance == std::vector<std::string>{"art-a"});
    CHECK(draft_from_query(store, {}, 1, ids).size() == 1);
    kdb::QueryFilter f;
    f.sector = "healthcare";
    CHECK(code_of([&] { draft_from_query(store, f, 2, ids); }) == Errc::no_candidates);
}

TEST_CASE("inject sync keeps the graph object in step") {
    ceso::IdFactory ids(6);
    auto d = draft_from_breadcrumb(crumb("art-qbot", kQbot, ymd(2022, 1, 10), ids), ids);
    sync_inject(d, 0, 5, 90, std::string("Contain qbot"));
    const auto* coa = d.graph.find(d.injects[0].course_of_action);
    CHECK(coa->extensions.difficulty == 5);
    CHECK(coa->properties["x_ceso_timing_offset"] == 90);
    CHECK(coa->name == "Contain qbot");
    validate_draft(d);
    CHECK(code_of([&] { sync_inject(d, 0, 6, std::nullopt, std::nullopt); }) == Errc::invalid_property);
    CHECK(code_of([&] { sync_inject(d, 0, std::nullopt, -1, std::nullopt); }) == Errc::invalid_property);
    CHECK(code_of([&] { sync_inject(d, 3, 1, std::nullopt, std::nullopt); }) == Errc::not_found);
}

TEST_CASE("property: random article drafts validate, trace and connect") {
    std::mt19937_64 rng(77);
    ceso::IdFactory ids(7);
    const std::vector<std::string> words{"apt28", "qbot", "phishing", "energy", "windows", "russian",
                                         "ransomware", "hackers", "cve-2021-44228", "servers", "log4shell",
                                         "brute force", "backdoor", "banking", "credentials"};
    DraftOptions opt;
    opt.allow_immature = true;
    for (int i = 0; i < 200; ++i) {
        std::string text;
        const int n = static_cast<int>(rng() % 10);
        for (int k = 0; k < n; ++k) text += words[rng() % words.size()] + " ";
        const auto d = draft_from_text(text, "r" + std::to_string(i), resources(), ids, opt);
        CHECK_NOTHROW(validate_draft(d));
        CHECK(untraced_objects(d.graph).empty());
        CHECK(root_reaches_all(d));
        CHECK(d.injects.size() == d.graph.of_kind(ceso::ObjectKind::attack_pattern).size());
        const auto report = render_report(d);
        for (const auto& [id, _] : d.graph.objects()) {
            std::size_t hits = 0;
            for (auto p = report.find("`" + id + "`"); p != std::string::npos; p = report.find("`" + id + "`", p + 1)) ++hits;
            CHECK(hits == 1);
        }
    }
}

TEST_CASE("golden report") {
    ceso::IdFactory ids(42);
    const auto d = draft_from_breadcrumb(crumb("art-full", kFull, ymd(2022, 2, 1), ids), ids);
    const auto text = render_report(d);
    const auto path = std::filesystem::path(CESOFORGE_GOLDEN_DIR) / "incident_report.md";
    if (std::getenv("CESOFORGE_UPDATE_GOLDEN")) std::ofstream(path) << text;
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == text);
}
