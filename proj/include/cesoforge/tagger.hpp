#pragma once

// Gazetteer/regex tagging of normalized article text, the maturity score,
// training-topic assignment and CESO breadcrumb fragments.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cesoforge/ceso.hpp"
#include "cesoforge/records.hpp"
#include "cesoforge/tags.hpp"

namespace cesoforge::tagger {

struct Gazetteer {
    TagCategory category = TagCategory::attack_type;
    std::vector<std::string> entries;
    /// ATTACK_TYPE only: phrase -> Lockheed-Martin phases.
    std::map<std::string, std::vector<std::string>, std::less<>> kill_chain;
};

class GazetteerSet {
public:
    /// Reads every `<CATEGORY>.json` in `dir`; throws ParseFailure.
    static GazetteerSet load(const std::filesystem::path& dir);

    /// Entries must be non-empty and lowercase; throws ParseFailure.
    void add(Gazetteer gazetteer);
    const std::vector<Gazetteer>& all() const noexcept { return gazetteers_; }
    std::vector<std::string> phases_for(std::string_view attack_type) const;

private:
    std::vector<Gazetteer> gazetteers_;
};

/// Gazetteer matches (longest phrase, case-insensitive, word-bounded) plus
/// CVE identifiers. Deterministic for a given text and gazetteer set.
TagSet tag_text(std::string_view text, const GazetteerSet& gazetteers, std::string article_id = {});
std::vector<TagSpan> match_cves(std::string_view text);

struct AnnotatedText {
    std::string id;
    std::string text;
    TagSet tags;
};

/// Lines of `{"id"?, "text", "spans":[{"start","end","label"}]}` with byte
/// offsets. Throws BadSpan, UnknownCategory or ParseFailure naming the line.
std::vector<AnnotatedText> load_external_annotations(std::string_view jsonl);

int maturity(const TagSet& tags);
inline constexpr int kMaturityThreshold = 50;
/// Throws PreconditionViolation for thresholds outside [0, 185].
bool is_mature(int score, int threshold = kMaturityThreshold);
bool is_mature(const TagSet& tags, int threshold = kMaturityThreshold);

using TopicTable = std::vector<std::pair<TrainingTopic, std::vector<std::string>>>;
/// `{"INCIDENT_HANDLING": ["malware", ...], ...}`; throws ParseFailure.
TopicTable load_topics(const std::filesystem::path& path);
/// Topics with at least one whole-word keyword hit, most distinct hits first.
std::vector<TrainingTopic> assign_topics(std::string_view text, const TagSet& tags,
                                         const TopicTable& table);

struct Resources {
    GazetteerSet gazetteers;
    TopicTable topics;

    /// `<dir>/gazetteers/` and `<dir>/topics.json`.
    static Resources load(const std::filesystem::path& dir);
};

ceso::CesoGraph build_fragment(const TagSet& tags, const GazetteerSet& gazetteers,
                               ceso::IdFactory& ids);
Breadcrumb to_breadcrumb(const ArticleRecord& article, const TagSet& tags,
                         const Resources& resources, ceso::IdFactory& ids);

}  // namespace cesoforge::tagger
