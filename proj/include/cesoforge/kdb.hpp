#pragma once

// Knowledge database: JSON-lines collections under one data directory, with
// an in-memory index rebuilt on open. Many readers, one writer.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cesoforge/records.hpp"

namespace cesoforge::kdb {

struct QueryFilter {
    std::vector<std::string> tags;  // every value must appear among span texts
    std::optional<std::string> sector;
    std::optional<std::string> attack_type;
    std::optional<TrainingTopic> topic;
    std::optional<Date> from;
    std::optional<Date> to;
    std::optional<std::string> name_tag;
    std::optional<int> min_maturity;

    bool matches(const Breadcrumb& b) const;
    nlohmann::json to_json() const;
    static QueryFilter from_json(const nlohmann::json& j);
};

using Ranked = std::vector<std::pair<std::string, int>>;

struct Stats {
    std::size_t matched = 0;
    std::map<YearMonth, int> count_by_month;
    Ranked top_attackers;
    Ranked top_techniques;
    Ranked top_malware;
    Ranked top_vulnerabilities;
    Ranked topic_breakdown;

    nlohmann::json to_json() const;
};

/// Counts descending, ties lexicographic, truncated to k.
Ranked top_k(const std::map<std::string, int>& counts, std::size_t k);

/// Id derived from the dedup key (URL when present, else normalized text).
std::string article_id_for(const ArticleRecord& record);

class Store {
public:
    explicit Store(std::filesystem::path data_dir);
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    const std::filesystem::path& data_dir() const noexcept { return dir_; }

    std::string put_article(ArticleRecord record);
    std::optional<ArticleRecord> article(std::string_view id) const;
    std::vector<ArticleRecord> articles() const;

    void put_breadcrumb(const Breadcrumb& breadcrumb);
    std::optional<Breadcrumb> breadcrumb(std::string_view article_id) const;
    /// Sorted by maturity descending, then publication date descending.
    std::vector<Breadcrumb> query(const QueryFilter& filter) const;
    Stats stats(const QueryFilter& filter, std::size_t k = 10) const;

    void put_incident(const StoredIncident& incident);
    std::optional<StoredIncident> incident(std::string_view id) const;
    std::optional<StoredIncident> incident_by_name(std::string_view name_tag) const;
    std::vector<StoredIncident> incidents() const;

    void put_profile(const AptProfile& profile);
    std::optional<AptProfile> profile(std::string_view group_id_or_name) const;
    std::vector<AptProfile> profiles() const;

    void put_scenario(const StoredScenario& scenario);
    std::optional<StoredScenario> scenario(std::string_view id) const;
    std::vector<StoredScenario> scenarios() const;

    static constexpr const char* kArticles = "articles.jsonl";
    static constexpr const char* kBreadcrumbs = "breadcrumbs.jsonl";
    static constexpr const char* kIncidents = "incidents.jsonl";
    static constexpr const char* kProfiles = "apt_profiles.jsonl";
    static constexpr const char* kScenarios = "scenarios.jsonl";

private:
    void append(const char* file, const nlohmann::json& line);
    template <typename Fn>
    void replay(const char* file, Fn&& apply);

    std::filesystem::path dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, ArticleRecord, std::less<>> articles_;
    std::map<std::string, Breadcrumb, std::less<>> breadcrumbs_;
    std::map<std::string, StoredIncident, std::less<>> incidents_;
    std::vector<std::string> incident_order_;
    std::map<std::string, AptProfile, std::less<>> profiles_;
    std::map<std::string, StoredScenario, std::less<>> scenarios_;
};

/// `--data-dir` flag value, else $CESOFORGE_DATA, else ./kdb.
std::filesystem::path resolve_data_dir(const std::optional<std::string>& flag);

}  // namespace cesoforge::kdb
