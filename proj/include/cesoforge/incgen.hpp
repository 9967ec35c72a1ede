#pragma once

// Incident drafting: intrusion-set rooted graphs from breadcrumbs, inject
// scaffolding and Markdown reports.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cesoforge/ceso.hpp"
#include "cesoforge/kdb.hpp"
#include "cesoforge/records.hpp"
#include "cesoforge/tagger.hpp"

namespace cesoforge::incgen {

struct DraftOptions {
    bool allow_immature = false;
    int threshold = tagger::kMaturityThreshold;
    int inject_spacing = 30;  // minutes between scaffolded injects
    int difficulty = 3;
};

/// Throws ImmatureSource below the threshold unless `allow_immature`.
IncidentDraft draft_from_breadcrumb(const Breadcrumb& breadcrumb, ceso::IdFactory& ids,
                                    const DraftOptions& options = {});

/// Tags `text` ad hoc and drafts from the resulting breadcrumb.
IncidentDraft draft_from_text(std::string_view text, std::string name_tag,
                              const tagger::Resources& resources, ceso::IdFactory& ids,
                              const DraftOptions& options = {});

/// Top-k matching breadcrumbs by maturity then recency. Immature breadcrumbs
/// are skipped unless `allow_immature`. Throws NoCandidates when nothing
/// qualifies and PreconditionViolation when k < 1.
std::vector<IncidentDraft> draft_from_query(const kdb::Store& store, const kdb::QueryFilter& filter,
                                            std::size_t k, ceso::IdFactory& ids,
                                            const DraftOptions& options = {});

/// Adds one course-of-action inject per attack-pattern of `graph` lacking
/// one; offsets continue after `start_offset`.
std::vector<InjectPlan> scaffold_injects(ceso::CesoGraph& graph, ceso::IdFactory& ids,
                                         int start_offset, const DraftOptions& options = {},
                                         const std::string& provenance = "rule:inject-scaffold");

/// Connects every object not reachable from `root` with a STIX-typical edge
/// flagged nonstandard.
void connect_orphans(ceso::CesoGraph& graph, const std::string& root, ceso::IdFactory& ids);

/// Graph validity plus the draft invariants (one intrusion-set, inject
/// bounds, mitigation edges). Throws InvariantViolation.
void validate_draft(const IncidentDraft& draft);

/// Ids of objects without a provenance entry.
std::vector<std::string> untraced_objects(const ceso::CesoGraph& graph);

/// Markdown summary; each graph object appears in exactly one entity row.
std::string render_report(const IncidentDraft& draft);

/// Keeps inject plans in step with edits to the graph's inject objects
/// (difficulty, timing).
void sync_inject(IncidentDraft& draft, std::size_t index, std::optional<int> difficulty,
                 std::optional<int> timing_offset, std::optional<std::string> title);

}  // namespace cesoforge::incgen
