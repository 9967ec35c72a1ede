#pragma once

// APT enhancement: ATT&CK group profiles, weighted similarity, ranking,
// graph merging and kill-chain filtering.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cesoforge/ceso.hpp"
#include "cesoforge/records.hpp"

namespace cesoforge::apt {

enum class Comparator { exact, token_set, edit_distance };

struct PropertyRule {
    std::string property;  // "name", "description" or a STIX property key
    double weight = 0;
    Comparator comparator = Comparator::exact;
    double threshold = 0.8;  // edit_distance only: minimum normalized similarity
};

/// Per-kind weight tables; kinds without a table use `fallback`.
struct SimilarityConfig {
    std::map<ceso::ObjectKind, std::vector<PropertyRule>> tables;
    std::vector<PropertyRule> fallback;

    const std::vector<PropertyRule>& rules_for(ceso::ObjectKind kind) const;
    /// Throws InvalidProperty on negative weights or a table not summing to 100.
    void check() const;

    static SimilarityConfig defaults();
    /// `kind.property = weight comparator [threshold]` lines; `default.` keys
    /// set the fallback table. Throws ParseFailure or InvalidProperty.
    static SimilarityConfig parse(std::string_view text);
    static SimilarityConfig load(const std::filesystem::path& path);
};

/// Graph-side projection compared when ranking profiles.
inline constexpr std::array kTtpKinds{ceso::ObjectKind::attack_pattern, ceso::ObjectKind::malware,
                                      ceso::ObjectKind::tool};

/// ATT&CK tactic shortname to kill-chain phase.
std::optional<std::string_view> phase_for_tactic(std::string_view tactic) noexcept;

/// One profile per intrusion-set with its `uses` closure. Techniques whose
/// tactics map to no phase are dropped with a warning. Throws MalformedBundle.
std::vector<AptProfile> ingest_attack(const ceso::Json& bundle, std::vector<std::string>* warnings = nullptr);
std::vector<AptProfile> ingest_attack_text(std::string_view bundle_text, std::vector<std::string>* warnings = nullptr);

double object_similarity(const ceso::CesoObject& a, const ceso::CesoObject& b, const SimilarityConfig& cfg);

/// Greedy best-match per kind, unmatched objects scoring 0. Two empty graphs
/// score 0.
double graph_similarity(const ceso::CesoGraph& g1, const ceso::CesoGraph& g2, const SimilarityConfig& cfg);

/// Objects of the given kinds with the relationships among them.
ceso::CesoGraph project(const ceso::CesoGraph& graph, std::span<const ceso::ObjectKind> kinds);

struct Ranked {
    std::size_t index;  // into the profile list
    std::string group_id;
    std::string name;
    double score;
};

/// Descending score, ties by group name. Compares TTP projections.
std::vector<Ranked> rank_apts(const IncidentDraft& draft, const std::vector<AptProfile>& profiles,
                              const SimilarityConfig& cfg);

struct MergeOptions {
    std::optional<std::set<std::string>> fragment;  // donor object ids
    std::optional<std::set<std::string>> phases;
};

/// Copies the selected donor objects into `base` with fresh ids, deduplicating
/// by kind and name in favour of base objects. Throws UnknownFragmentId,
/// EmptySelection, or PreconditionViolation for unknown phase names.
IncidentDraft merge(const IncidentDraft& base, const AptProfile& donor, ceso::IdFactory& ids,
                    const MergeOptions& options = {});

/// Drops attack-patterns outside `phases`, objects attached only to dropped
/// attack-patterns, and then anything no longer connected to an intrusion-set. Unlabelled attack-patterns survive only
/// when every phase is selected.
ceso::CesoGraph filter_kill_chain(const ceso::CesoGraph& graph, const std::set<std::string>& phases);
/// Same, pruning injects whose course-of-action disappeared.
IncidentDraft filter_kill_chain(const IncidentDraft& draft, const std::set<std::string>& phases);

std::set<std::string> all_phases();

}  // namespace cesoforge::apt
