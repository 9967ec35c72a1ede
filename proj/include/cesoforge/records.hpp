#pragma once

// Records persisted in the knowledge database.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cesoforge/ceso.hpp"
#include "cesoforge/chrono.hpp"
#include "cesoforge/tags.hpp"

namespace cesoforge {

struct ArticleRecord {
    std::string id;
    std::string source;
    std::optional<std::string> url;
    Date published{};
    std::string raw_text;
    std::string normalized_text;
    std::string name_tag;

    bool operator==(const ArticleRecord&) const = default;
};

struct Breadcrumb {
    std::string article_id;
    std::string name_tag;
    Date published{};
    TagSet tags;
    int maturity = 0;
    std::vector<TrainingTopic> topics;
    ceso::CesoGraph fragment;

    bool operator==(const Breadcrumb&) const = default;
};

struct InjectPlan {
    std::string title;
    std::string description;
    int timing_offset = 0;  // minutes from incident start
    int difficulty = 3;     // 1..5
    std::string course_of_action;       // the inject's course-of-action id
    std::vector<std::string> carriers;  // ids forming the inject

    bool operator==(const InjectPlan&) const = default;
};

struct IncidentDraft {
    std::string root;  // intrusion-set id
    std::string name_tag;
    ceso::CesoGraph graph;
    std::vector<InjectPlan> injects;
    std::vector<std::string> provenance;  // article ids, "apt:<group id>"
    int maturity = 0;
    bool low_maturity = false;
    std::vector<TrainingTopic> topics;
    TagSet tags;

    bool operator==(const IncidentDraft&) const = default;
};

struct StoredIncident {
    std::string id;
    std::string name_tag;
    Timestamp created{};
    IncidentDraft draft;

    bool operator==(const StoredIncident&) const = default;
};

struct AptProfile {
    std::string group_id;  // ATT&CK external id (G0007), else the intrusion-set id
    std::string name;
    std::vector<std::string> aliases;
    ceso::CesoGraph graph;

    bool operator==(const AptProfile&) const = default;
};

struct StoredScenario {
    std::string id;
    std::string name;
    Timestamp created{};
    nlohmann::json spec;
    ceso::CesoGraph graph;
    std::string storyline;

    bool operator==(const StoredScenario&) const = default;
};

nlohmann::json to_json(const ArticleRecord& r);
ArticleRecord article_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Breadcrumb& b);
Breadcrumb breadcrumb_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InjectPlan& p);
InjectPlan inject_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IncidentDraft& d);
IncidentDraft draft_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StoredIncident& s);
StoredIncident incident_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AptProfile& p);
AptProfile profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StoredScenario& s);
StoredScenario scenario_from_json(const nlohmann::json& j);

}  // namespace cesoforge
