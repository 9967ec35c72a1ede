#include <doctest.h>

#include <random>
#include <set>

#include "cesoforge/ceso.hpp"
#include "cesoforge/errors.hpp"

using namespace cesoforge;
using namespace cesoforge::ceso;

namespace {

// Literal transcription of the reference relationship matrix, by STIX type name.
struct Row {
    const char* source;
    const char* target;
    const char* rel;
};
constexpr Row kPublished[] = {
    {"campaign", "grouping", "related_to"},
    {"note", "grouping", "related_to"},
    {"report", "grouping", "related_to"},
    {"intrusion-set", "campaign", "related_to"},
    {"course-of-action", "grouping", "related_to"},
    {"intrusion-set", "tool", "targets"},
    {"intrusion-set", "vulnerability", "targets"},
    {"intrusion-set", "attack-pattern", "uses"},
    {"identity", "infrastructure", "uses"},
    {"attack-pattern", "threat-actor", "attributed_to"},
    {"threat-actor", "identity", "attributed_to"},
    {"identity", "location", "located_at"},
    {"attack-pattern", "malware", "delivers"},
    {"attack-pattern", "indicator", "indicates"},
    {"indicator", "malware", "indicates"},
    {"attack-pattern", "vulnerability", "exploits"},
    {"course-of-action", "attack-pattern", "mitigates"},
    {"course-of-action", "vulnerability", "mitigates"},
};

CesoGraph random_graph(std::mt19937_64& rng, IdFactory& ids) {
    CesoGraph g;
    std::uniform_int_distribution<int> count(0, 12);
    std::uniform_int_distribution<std::size_t> kind_pick(0, kAllKinds.size() - 2);
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        const auto kind = kAllKinds[kind_pick(rng)];
        Json props = Json::object();
        if (kind == ObjectKind::grouping) props["scenario"] = "exercise " + std::to_string(i);
        if (kind == ObjectKind::course_of_action && rng() % 2 == 0) {
            props["difficulty"] = static_cast<int>(rng() % 5) + 1;
        }
        if (kind == ObjectKind::identity && rng() % 2 == 0) props["recipient_group"] = "SOC";
        if (rng() % 3 == 0) props["description"] = "text \"quoted\" \n line " + std::to_string(i);
        if (kind == ObjectKind::attack_pattern) {
            props["kill_chain_phases"] = Json::array(
                {{{"kill_chain_name", std::string(kKillChainName)}, {"phase_name", "delivery"}}});
        }
        g.insert(new_object(ids, kind, "obj " + std::to_string(i) + " \xc3\xa9", props));
    }
    std::vector<std::string> idlist(g.order());
    if (!idlist.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, idlist.size() - 1);
        const int m = count(rng);
        for (int i = 0; i < m; ++i) {
            const auto& s = idlist[pick(rng)];
            const auto& t = idlist[pick(rng)];
            const auto type = static_cast<RelType>(rng() % 9);
            g.link(s, t, type, ids, LinkMode::allow_nonstandard);
        }
    }
    return g;
}

}  // namespace

TEST_CASE("relationship matrix matches the reference enumeration") {
    std::set<std::tuple<std::string, std::string, std::string>> expected;
    for (const auto& r : kPublished) expected.emplace(r.source, r.target, r.rel);
    std::set<std::tuple<std::string, std::string, std::string>> actual;
    for (const auto& t : legal_triples()) {
        actual.emplace(std::string(to_string(t.source)), std::string(to_string(t.target)),
                       std::string(to_string(t.type)));
    }
    CHECK(legal_triples().size() == std::size(kPublished));
    CHECK(actual == expected);
}

TEST_CASE("relationship type names") {
    CHECK(wire_name(RelType::related_to) == "related-to");
    CHECK(to_string(RelType::attributed_to) == "attributed_to");
    CHECK(parse_rel_type("located-at") == RelType::located_at);
    CHECK(parse_rel_type("located_at") == RelType::located_at);
    CHECK_FALSE(parse_rel_type("derived-from").has_value());
}

TEST_CASE("new_object enforces extensions") {
    IdFactory ids(1);
    SUBCASE("grouping without scenario") {
        try {
            new_object(ids, ObjectKind::grouping, "g");
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::missing_mandatory_extension);
        }
    }
    SUBCASE("difficulty out of range") {
        try {
            new_object(ids, ObjectKind::course_of_action, "c", {{"difficulty", 6}});
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::invalid_property);
        }
    }
    SUBCASE("difficulty on wrong kind") {
        CHECK_THROWS_AS(new_object(ids, ObjectKind::identity, "i", {{"difficulty", 2}}), Error);
    }
    SUBCASE("valid course-of-action") {
        auto coa = new_object(ids, ObjectKind::course_of_action, "Block macros", {{"difficulty", 3}});
        CHECK(coa.extensions.difficulty == 3);
        CHECK(id_has_kind(coa.id, "course-of-action"));
        CHECK(is_valid_id(coa.id));
    }
    SUBCASE("reserved key") {
        CHECK_THROWS_AS(new_object(ids, ObjectKind::tool, "t", {{"source_ref", "x"}}), Error);
    }
}

TEST_CASE("link validates endpoints and triples") {
    IdFactory ids(2);
    CesoGraph g;
    auto m = new_object(ids, ObjectKind::malware, "qbot");
    auto l = new_object(ids, ObjectKind::location, "Russia");
    const auto mid = m.id;
    const auto lid = l.id;
    g.insert(m);
    g.insert(l);

    try {
        g.link(mid, lid, RelType::located_at, ids);
        FAIL("expected IllegalTriple");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::illegal_triple);
    }
    const auto& r = g.link(mid, lid, RelType::located_at, ids, LinkMode::allow_nonstandard);
    CHECK(r.nonstandard);

    try {
        g.link(mid, "tool--00000000-0000-4000-8000-000000000000", RelType::uses, ids);
        FAIL("expected UnknownEndpoint");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_endpoint);
    }
    CHECK(check(g).empty());
}

TEST_CASE("erase removes incident edges") {
    IdFactory ids(3);
    CesoGraph g;
    auto ap = new_object(ids, ObjectKind::attack_pattern, "Phishing");
    auto mw = new_object(ids, ObjectKind::malware, "qbot");
    g.insert(ap);
    g.insert(mw);
    g.link(ap.id, mw.id, RelType::delivers, ids);
    g.erase(mw.id);
    CHECK(g.relationships().empty());
    CHECK(check(g).empty());
}

TEST_CASE("seeded factories are reproducible") {
    IdFactory a(42);
    IdFactory b(42);
    for (int i = 0; i < 50; ++i) CHECK(a.uuid() == b.uuid());
    CHECK(a.now() == b.now());
    CHECK(format_timestamp(a.now()) == "2022-03-31T00:00:00.000Z");
}

TEST_CASE("property: bundle round trip over random graphs") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        IdFactory ids(rng());
        const auto g = random_graph(rng, ids);
        CHECK(check(g).empty());
        const auto text = serialize_bundle(g);
        const auto back = parse_bundle(text);
        CHECK(back == g);
        CHECK(serialize_bundle(back) == text);
    }
}

TEST_CASE("wire format") {
    IdFactory ids(5);
    CesoGraph g;
    auto grp = new_object(ids, ObjectKind::grouping, "Exercise", {{"scenario", "ransomware drill"}, {"context", "training"}});
    auto camp = new_object(ids, ObjectKind::campaign, "Day 1");
    g.insert(grp);
    g.insert(camp);
    g.link(camp.id, grp.id, RelType::related_to, ids);
    const auto j = bundle_json(g);
    CHECK(j["type"] == "bundle");
    bool saw_rel = false;
    for (const auto& o : j["objects"]) {
        CHECK(o["spec_version"] == "2.1");
        if (o["type"] == "relationship") {
            saw_rel = true;
            CHECK(o["relationship_type"] == "related-to");
            CHECK_FALSE(o.contains("x_ceso_nonstandard"));
        }
        if (o["type"] == "grouping") {
            const auto& ext = o["extensions"][std::string(kExtensionKey)];
            CHECK(ext["scenario"] == "ransomware drill");
            CHECK(ext["extension_type"] == "property-extension");
        }
    }
    CHECK(saw_rel);
}

TEST_CASE("parse modes") {
    const std::string foreign = R"({"type":"bundle","id":"bundle--1","objects":[
      {"type":"intrusion-set","spec_version":"2.1","id":"intrusion-set--11111111-1111-4111-8111-111111111111",
       "created":"2020-01-01T00:00:00.000Z","modified":"2020-01-01T00:00:00.000Z","name":"APT1"},
      {"type":"malware","spec_version":"2.1","id":"malware--22222222-2222-4222-8222-222222222222",
       "created":"2020-01-01T00:00:00.000Z","modified":"2020-01-01T00:00:00.000Z","name":"m","is_family":true},
      {"type":"x-mitre-tactic","id":"x-mitre-tactic--33333333-3333-4333-8333-333333333333","name":"Execution"},
      {"type":"relationship","spec_version":"2.1","id":"relationship--44444444-4444-4444-8444-444444444444",
       "created":"2020-01-01T00:00:00.000Z","modified":"2020-01-01T00:00:00.000Z","relationship_type":"uses",
       "source_ref":"intrusion-set--11111111-1111-4111-8111-111111111111",
       "target_ref":"malware--22222222-2222-4222-8222-222222222222"}]})";
    try {
        parse_bundle(foreign, ParseMode::strict);
        FAIL("expected InvariantViolation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invariant_violation);
    }
    const auto g = parse_bundle(foreign, ParseMode::foreign);
    REQUIRE(g.relationships().size() == 1);
    CHECK(g.relationships().begin()->second.nonstandard);
    CHECK(g.opaque().size() == 1);
    // Flag is persisted so the strict reparse accepts it.
    CHECK(parse_bundle(serialize_bundle(g)) == g);

    try {
        parse_bundle("{not json");
        FAIL("expected MalformedBundle");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_bundle);
    }
}

TEST_CASE("kill chain labels") {
    IdFactory ids(9);
    auto ap = new_object(ids, ObjectKind::attack_pattern, "Spearphishing Attachment");
    add_kill_chain_label(ap, "delivery");
    add_kill_chain_label(ap, "delivery");
    add_kill_chain_label(ap, "exploitation");
    CHECK(kill_chain_labels(ap) == std::vector<std::string>{"delivery", "exploitation"});
    CHECK(is_kill_chain_phase("command-and-control"));
    CHECK_FALSE(is_kill_chain_phase("execution"));
}
