#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cesoforge {

enum class TagCategory {
    attacker_type,
    attacker_name,
    attacker_origin,
    malware_type,
    malware_name,
    attack_type,
    vulnerability,
    sector,
    assets,
    technology,
};

inline constexpr std::array kAllCategories{
    TagCategory::attacker_type, TagCategory::attacker_name, TagCategory::attacker_origin,
    TagCategory::malware_type,  TagCategory::malware_name,  TagCategory::attack_type,
    TagCategory::vulnerability, TagCategory::sector,        TagCategory::assets,
    TagCategory::technology,
};

/// Annotation groups; `other` is the implicit class for untagged terms.
enum class TagGroup { attacker, attack, victim, other };

std::string_view to_string(TagCategory c) noexcept;  // "ATTACKER_TYPE"
std::optional<TagCategory> parse_category(std::string_view name) noexcept;
TagGroup group_of(TagCategory c) noexcept;
std::string_view to_string(TagGroup g) noexcept;  // "Attacker"
std::optional<TagGroup> parse_group(std::string_view name) noexcept;

enum class TaggerKind { gazetteer, regex, external };
std::string_view to_string(TaggerKind k) noexcept;
std::optional<TaggerKind> parse_tagger_kind(std::string_view name) noexcept;

struct TagSpan {
    TagCategory category = TagCategory::attack_type;
    std::string text;
    std::size_t start = 0;
    std::size_t end = 0;
    TaggerKind tagger = TaggerKind::gazetteer;

    bool operator==(const TagSpan&) const = default;
};

/// Spans over one text, sorted by start; same-category overlaps are
/// collapsed to the longest span.
class TagSet {
public:
    TagSet() = default;
    TagSet(std::string article_id, std::vector<TagSpan> spans);

    const std::string& article_id() const noexcept { return article_id_; }
    void set_article_id(std::string id) { article_id_ = std::move(id); }
    const std::vector<TagSpan>& spans() const noexcept { return spans_; }
    bool empty() const noexcept { return spans_.empty(); }

    /// Re-applies the ordering and dedup invariants after adding spans.
    void add(std::vector<TagSpan> spans);

    bool has(TagCategory c) const noexcept;
    std::vector<TagCategory> present_categories() const;
    /// Distinct span texts of one category, in first-occurrence order.
    std::vector<std::string> values(TagCategory c) const;

    bool operator==(const TagSet&) const = default;

private:
    void normalize();

    std::string article_id_;
    std::vector<TagSpan> spans_;
};

enum class TrainingTopic {
    incident_handling,
    gdpr,
    cyber_hygiene,
    phishing_social_engineering,
    social_media,
    byod,
};

inline constexpr std::array kAllTopics{
    TrainingTopic::incident_handling,           TrainingTopic::gdpr,
    TrainingTopic::cyber_hygiene,               TrainingTopic::phishing_social_engineering,
    TrainingTopic::social_media,                TrainingTopic::byod,
};

std::string_view to_string(TrainingTopic t) noexcept;  // "INCIDENT_HANDLING"
std::optional<TrainingTopic> parse_topic(std::string_view name) noexcept;

nlohmann::json to_json(const TagSpan& span);
TagSpan span_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TagSet& tags);
TagSet tagset_from_json(const nlohmann::json& j);

}  // namespace cesoforge
