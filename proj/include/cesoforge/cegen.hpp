#pragma once

// Exercise assembly: scenario graphs from stored incidents, the MSEL tree,
// storyline synthesis and the exported artifacts.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cesoforge/ceso.hpp"
#include "cesoforge/kdb.hpp"
#include "cesoforge/records.hpp"

namespace cesoforge::cegen {

struct EventSpec {
    std::string name;
    std::string description;
    std::vector<std::string> incidents;  // stored-incident names or ids
};

struct ParticipantSpec {
    std::string name;
    std::string recipient_group;
    std::optional<std::string> location;
};

struct StorylineSpec {
    std::optional<std::string> seed;  // derived from the graph when absent
    std::string synthesizer = "template";
    std::string command;  // external synthesizer only
    std::size_t max_words = 250;
};

struct ScenarioSpec {
    std::string name;
    std::string description;
    std::vector<std::string> objectives;
    std::vector<EventSpec> events;
    std::vector<ParticipantSpec> participants;
    bool include_startex_endex = true;
    std::string platform = "Cyber range";
    StorylineSpec storyline;

    /// Throws ValidationError.
    void check() const;
    nlohmann::json to_json() const;
    /// Throws ParseFailure on shape errors and ValidationError on invariants.
    static ScenarioSpec from_json(const nlohmann::json& j);
};

using IncidentResolver = std::function<std::optional<StoredIncident>(std::string_view)>;
IncidentResolver store_resolver(const kdb::Store& store);

/// Minutes between the last inject and ENDEX.
inline constexpr int kEndexGap = 30;

/// Throws UnresolvedIncident or ValidationFailure.
ceso::CesoGraph build_scenario(const ScenarioSpec& spec, const IncidentResolver& resolve, ceso::IdFactory& ids);

struct MselNode {
    std::string level;  // scenario, event, incident, inject
    std::string ref;    // object id
    std::string name;
    std::string description;
    int timing = 0;  // minutes from STARTEX
    std::optional<int> difficulty;
    std::optional<int> startex, endex;  // scenario node only
    std::vector<MselNode> children;
};

/// Throws NotAScenarioGraph when there is no grouping.
MselNode emit_msel(const ceso::CesoGraph& graph);
nlohmann::json to_json(const MselNode& node);
std::size_t depth(const MselNode& node);
std::string format_timing(int minutes);  // "T+01:30"

struct StorylinePrompt {
    std::string seed_text;
    std::size_t max_words = 250;
    std::string synthesizer = "template";
    std::string command;
};

/// Output always begins with the seed. Longer output is cut at the last
/// sentence end within `max_words` (never inside the seed). Throws
/// PreconditionViolation for an empty seed, AdapterUnavailable otherwise.
std::string generate_storyline(const StorylinePrompt& prompt, const ceso::CesoGraph& context);
/// "<actor> attacked <sector> using <TECHNIQUE> to" from the graph contents.
std::string default_seed(const ceso::CesoGraph& graph);

/// Puts the storyline into the SoW report description.
void attach_storyline(ceso::CesoGraph& graph, const std::string& storyline);

std::string render_markdown(const ceso::CesoGraph& graph, const MselNode& msel, const std::string& storyline);

struct ExportPaths {
    std::filesystem::path bundle, markdown, msel;
};
/// Writes bundle.json, scenario.md and msel.json. Throws IoFailure.
ExportPaths export_exercise(const ceso::CesoGraph& graph, const MselNode& msel, const std::string& storyline,
                            const std::filesystem::path& out_dir);

/// build, storyline, store, export (when `out_dir` is given).
StoredScenario generate(const ScenarioSpec& spec, kdb::Store& store, ceso::IdFactory& ids,
                        const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace cesoforge::cegen
