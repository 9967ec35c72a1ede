#include "cesoforge/records.hpp"

#include "cesoforge/errors.hpp"

namespace cesoforge {

using nlohmann::json;

namespace {

Date date_field(const json& j, const char* key) {
    auto d = parse_date(j.at(key).get<std::string>());
    if (!d) throw Error(Errc::parse_failure, std::string("bad date in ") + key);
    return *d;
}

Timestamp ts_field(const json& j, const char* key) {
    auto t = parse_timestamp(j.at(key).get<std::string>());
    if (!t) throw Error(Errc::parse_failure, std::string("bad timestamp in ") + key);
    return *t;
}

json topics_json(const std::vector<TrainingTopic>& topics) {
    json out = json::array();
    for (auto t : topics) out.push_back(to_string(t));
    return out;
}

std::vector<TrainingTopic> topics_from(const json& j) {
    std::vector<TrainingTopic> out;
    for (const auto& t : j) {
        if (auto topic = parse_topic(t.get<std::string>())) out.push_back(*topic);
    }
    return out;
}

// Stored graphs are always CESO-produced, but APT profiles carry ATT&CK
// relationships that were flagged on import; both round-trip in strict mode.
ceso::CesoGraph graph_field(const json& j, const char* key) {
    return ceso::graph_from_json(j.at(key), ceso::ParseMode::strict);
}

}  // namespace

json to_json(const ArticleRecord& r) {
    json j{{"id", r.id},
           {"source", r.source},
           {"published", format_date(r.published)},
           {"raw_text", r.raw_text},
           {"normalized_text", r.normalized_text},
           {"name_tag", r.name_tag}};
    if (r.url) j["url"] = *r.url;
    return j;
}

ArticleRecord article_from_json(const json& j) {
    ArticleRecord r;
    r.id = j.at("id").get<std::string>();
    r.source = j.at("source").get<std::string>();
    if (j.contains("url") && j["url"].is_string()) r.url = j["url"].get<std::string>();
    r.published = date_field(j, "published");
    r.raw_text = j.at("raw_text").get<std::string>();
    r.normalized_text = j.at("normalized_text").get<std::string>();
    r.name_tag = j.value("name_tag", "");
    return r;
}

json to_json(const Breadcrumb& b) {
    return {{"article_id", b.article_id},
            {"name_tag", b.name_tag},
            {"published", format_date(b.published)},
            {"tags", to_json(b.tags)},
            {"maturity", b.maturity},
            {"topics", topics_json(b.topics)},
            {"fragment", ceso::bundle_json(b.fragment)}};
}

Breadcrumb breadcrumb_from_json(const json& j) {
    Breadcrumb b;
    b.article_id = j.at("article_id").get<std::string>();
    b.name_tag = j.value("name_tag", "");
    b.published = date_field(j, "published");
    b.tags = tagset_from_json(j.at("tags"));
    b.maturity = j.at("maturity").get<int>();
    b.topics = topics_from(j.at("topics"));
    b.fragment = graph_field(j, "fragment");
    return b;
}

json to_json(const InjectPlan& p) {
    return {{"title", p.title},
            {"description", p.description},
            {"timing_offset", p.timing_offset},
            {"difficulty", p.difficulty},
            {"course_of_action", p.course_of_action},
            {"carriers", p.carriers}};
}

InjectPlan inject_from_json(const json& j) {
    InjectPlan p;
    p.title = j.at("title").get<std::string>();
    p.description = j.value("description", "");
    p.timing_offset = j.at("timing_offset").get<int>();
    p.difficulty = j.at("difficulty").get<int>();
    p.course_of_action = j.value("course_of_action", "");
    p.carriers = j.value("carriers", std::vector<std::string>{});
    return p;
}

json to_json(const IncidentDraft& d) {
    json injects = json::array();
    for (const auto& i : d.injects) injects.push_back(to_json(i));
    return {{"root", d.root},
            {"name_tag", d.name_tag},
            {"graph", ceso::bundle_json(d.graph)},
            {"injects", injects},
            {"provenance", d.provenance},
            {"maturity", d.maturity},
            {"low_maturity", d.low_maturity},
            {"topics", topics_json(d.topics)},
            {"tags", to_json(d.tags)}};
}

IncidentDraft draft_from_json(const json& j) {
    IncidentDraft d;
    d.root = j.at("root").get<std::string>();
    d.name_tag = j.value("name_tag", "");
    d.graph = graph_field(j, "graph");
    for (const auto& i : j.at("injects")) d.injects.push_back(inject_from_json(i));
    d.provenance = j.value("provenance", std::vector<std::string>{});
    d.maturity = j.value("maturity", 0);
    d.low_maturity = j.value("low_maturity", false);
    d.topics = topics_from(j.value("topics", json::array()));
    if (j.contains("tags")) d.tags = tagset_from_json(j["tags"]);
    return d;
}

json to_json(const StoredIncident& s) {
    return {{"id", s.id},
            {"name_tag", s.name_tag},
            {"created", format_timestamp(s.created)},
            {"draft", to_json(s.draft)}};
}

StoredIncident incident_from_json(const json& j) {
    StoredIncident s;
    s.id = j.at("id").get<std::string>();
    s.name_tag = j.at("name_tag").get<std::string>();
    s.created = ts_field(j, "created");
    s.draft = draft_from_json(j.at("draft"));
    return s;
}

json to_json(const AptProfile& p) {
    return {{"group_id", p.group_id},
            {"name", p.name},
            {"aliases", p.aliases},
            {"graph", ceso::bundle_json(p.graph)}};
}

AptProfile profile_from_json(const json& j) {
    AptProfile p;
    p.group_id = j.at("group_id").get<std::string>();
    p.name = j.at("name").get<std::string>();
    p.aliases = j.value("aliases", std::vector<std::string>{});
    p.graph = graph_field(j, "graph");
    return p;
}

json to_json(const StoredScenario& s) {
    return {{"id", s.id},
            {"name", s.name},
            {"created", format_timestamp(s.created)},
            {"spec", s.spec},
            {"graph", ceso::bundle_json(s.graph)},
            {"storyline", s.storyline}};
}

StoredScenario scenario_from_json(const json& j) {
    StoredScenario s;
    s.id = j.at("id").get<std::string>();
    s.name = j.value("name", "");
    s.created = ts_field(j, "created");
    s.spec = j.value("spec", json::object());
    s.graph = graph_field(j, "graph");
    s.storyline = j.value("storyline", "");
    return s;
}

}  // namespace cesoforge
