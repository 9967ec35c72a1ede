#include "cesoforge/tags.hpp"

#include <algorithm>
#include <cctype>

#include "cesoforge/errors.hpp"

namespace cesoforge {

namespace {

struct CategoryInfo {
    TagCategory category;
    std::string_view name;
    TagGroup group;
};

constexpr std::array<CategoryInfo, 10> kCategories{{
    {TagCategory::attacker_type, "ATTACKER_TYPE", TagGroup::attacker},
    {TagCategory::attacker_name, "ATTACKER_NAME", TagGroup::attacker},
    {TagCategory::attacker_origin, "ATTACKER_ORIGIN", TagGroup::attacker},
    {TagCategory::malware_type, "MALWARE_TYPE", TagGroup::attack},
    {TagCategory::malware_name, "MALWARE_NAME", TagGroup::attack},
    {TagCategory::attack_type, "ATTACK_TYPE", TagGroup::attack},
    {TagCategory::vulnerability, "VULNERABILITY", TagGroup::attack},
    {TagCategory::sector, "SECTOR", TagGroup::victim},
    {TagCategory::assets, "ASSETS", TagGroup::victim},
    {TagCategory::technology, "TECHNOLOGY", TagGroup::victim},
}};

constexpr std::array<std::pair<TrainingTopic, std::string_view>, 6> kTopicNames{{
    {TrainingTopic::incident_handling, "INCIDENT_HANDLING"},
    {TrainingTopic::gdpr, "GDPR"},
    {TrainingTopic::cyber_hygiene, "CYBER_HYGIENE"},
    {TrainingTopic::phishing_social_engineering, "PHISHING_SOCIAL_ENGINEERING"},
    {TrainingTopic::social_media, "SOCIAL_MEDIA"},
    {TrainingTopic::byod, "BYOD"},
}};

bool overlaps(const TagSpan& a, const TagSpan& b) {
    return a.start < b.end && b.start < a.end;
}

}  // namespace

std::string_view to_string(TagCategory c) noexcept {
    for (const auto& info : kCategories) {
        if (info.category == c) return info.name;
    }
    return "UNKNOWN";
}

std::optional<TagCategory> parse_category(std::string_view name) noexcept {
    for (const auto& info : kCategories) {
        if (info.name == name) return info.category;
    }
    if (name == "TECHNIQUE") return TagCategory::attack_type;
    return std::nullopt;
}

TagGroup group_of(TagCategory c) noexcept {
    for (const auto& info : kCategories) {
        if (info.category == c) return info.group;
    }
    return TagGroup::other;
}

std::string_view to_string(TagGroup g) noexcept {
    switch (g) {
        case TagGroup::attacker: return "Attacker";
        case TagGroup::attack: return "Attack";
        case TagGroup::victim: return "Victim";
        case TagGroup::other: return "Other";
    }
    return "Other";
}

std::optional<TagGroup> parse_group(std::string_view name) noexcept {
    for (auto g : {TagGroup::attacker, TagGroup::attack, TagGroup::victim, TagGroup::other}) {
        if (to_string(g) == name) return g;
    }
    return std::nullopt;
}

std::string_view to_string(TaggerKind k) noexcept {
    switch (k) {
        case TaggerKind::gazetteer: return "gazetteer";
        case TaggerKind::regex: return "regex";
        case TaggerKind::external: return "external";
    }
    return "gazetteer";
}

std::optional<TaggerKind> parse_tagger_kind(std::string_view name) noexcept {
    for (auto k : {TaggerKind::gazetteer, TaggerKind::regex, TaggerKind::external}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

std::string_view to_string(TrainingTopic t) noexcept {
    for (const auto& [topic, name] : kTopicNames) {
        if (topic == t) return name;
    }
    return "UNKNOWN";
}

std::optional<TrainingTopic> parse_topic(std::string_view name) noexcept {
    std::string upper(name);
    for (auto& ch : upper) {
        ch = ch == '-' || ch == ' ' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    for (const auto& [topic, n] : kTopicNames) {
        if (n == upper) return topic;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

TagSet::TagSet(std::string article_id, std::vector<TagSpan> spans)
    : article_id_(std::move(article_id)), spans_(std::move(spans)) {
    normalize();
}

void TagSet::add(std::vector<TagSpan> spans) {
    spans_.insert(spans_.end(), std::make_move_iterator(spans.begin()),
                  std::make_move_iterator(spans.end()));
    normalize();
}

void TagSet::normalize() {
    // Longest first so that the survivor of an overlap is the longest span.
    std::vector<TagSpan> by_length = std::move(spans_);
    std::stable_sort(by_length.begin(), by_length.end(), [](const TagSpan& a, const TagSpan& b) {
        const auto la = a.end - a.start;
        const auto lb = b.end - b.start;
        if (la != lb) return la > lb;
        return a.start < b.start;
    });
    std::vector<TagSpan> kept;
    for (auto& s : by_length) {
        const bool clash = std::any_of(kept.begin(), kept.end(), [&](const TagSpan& k) {
            return k.category == s.category && overlaps(k, s);
        });
        if (!clash) kept.push_back(std::move(s));
    }
    std::sort(kept.begin(), kept.end(), [](const TagSpan& a, const TagSpan& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.end != b.end) return a.end > b.end;
        return a.category < b.category;
    });
    spans_ = std::move(kept);
}

bool TagSet::has(TagCategory c) const noexcept {
    return std::any_of(spans_.begin(), spans_.end(),
                       [c](const TagSpan& s) { return s.category == c; });
}

std::vector<TagCategory> TagSet::present_categories() const {
    std::vector<TagCategory> out;
    for (auto c : kAllCategories) {
        if (has(c)) out.push_back(c);
    }
    return out;
}

std::vector<std::string> TagSet::values(TagCategory c) const {
    std::vector<std::string> out;
    for (const auto& s : spans_) {
        if (s.category == c && std::find(out.begin(), out.end(), s.text) == out.end()) {
            out.push_back(s.text);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const TagSpan& span) {
    return {{"category", to_string(span.category)},
            {"text", span.text},
            {"start", span.start},
            {"end", span.end},
            {"tagger", to_string(span.tagger)}};
}

TagSpan span_from_json(const nlohmann::json& j) {
    TagSpan s;
    const auto cat = parse_category(j.at("category").get<std::string>());
    if (!cat) throw Error(Errc::unknown_category, "unknown tag category");
    s.category = *cat;
    s.text = j.at("text").get<std::string>();
    s.start = j.at("start").get<std::size_t>();
    s.end = j.at("end").get<std::size_t>();
    s.tagger = parse_tagger_kind(j.value("tagger", "gazetteer")).value_or(TaggerKind::gazetteer);
    return s;
}

nlohmann::json to_json(const TagSet& tags) {
    auto spans = nlohmann::json::array();
    for (const auto& s : tags.spans()) spans.push_back(to_json(s));
    return {{"article_id", tags.article_id()}, {"spans", spans}};
}

TagSet tagset_from_json(const nlohmann::json& j) {
    std::vector<TagSpan> spans;
    for (const auto& s : j.at("spans")) spans.push_back(span_from_json(s));
    return TagSet(j.value("article_id", ""), std::move(spans));
}

}  // namespace cesoforge
