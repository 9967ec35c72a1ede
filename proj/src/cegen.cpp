#include "cesoforge/cegen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include "cesoforge/errors.hpp"

namespace cesoforge::cegen {

using ceso::CesoGraph;
using ceso::CesoObject;
using ceso::Json;
using ceso::ObjectKind;
using ceso::RelType;

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep = ", ") {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

// "a", "a and b", "a, b and c"
std::string prose_list(const std::vector<std::string>& items) {
    if (items.empty()) return {};
    if (items.size() == 1) return items[0];
    std::vector<std::string> head(items.begin(), items.end() - 1);
    return join(head) + " and " + items.back();
}

int timing_of(const CesoObject& o) {
    const auto it = o.properties.find("x_ceso_timing_offset");
    return it != o.properties.end() && it->is_number_integer() ? it->get<int>() : 0;
}

int sequence_of(const CesoObject& o) {
    const auto it = o.properties.find("x_ceso_sequence");
    return it != o.properties.end() && it->is_number_integer() ? it->get<int>() : 0;
}

bool is_inject(const CesoObject& o) {
    return o.kind == ObjectKind::course_of_action && o.properties.value("x_ceso_inject", false);
}

std::string scenario_marker(const CesoObject& o) {
    const auto it = o.properties.find("x_ceso_scenario_inject");
    return it != o.properties.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::vector<const CesoObject*> by_sequence(std::vector<const CesoObject*> objs) {
    std::stable_sort(objs.begin(), objs.end(),
                     [](const CesoObject* a, const CesoObject* b) { return sequence_of(*a) < sequence_of(*b); });
    return objs;
}

// Everything reachable from an incident root without crossing scenario-level
// objects or other incidents.
std::vector<const CesoObject*> incident_cluster(const CesoGraph& g, const std::string& root) {
    std::set<std::string> seen{root};
    std::deque<std::string> queue{root};
    auto enter = [&](const std::string& id) {
        const auto* o = g.find(id);
        if (o == nullptr || seen.contains(id)) return;
        switch (o->kind) {
            case ObjectKind::grouping:
            case ObjectKind::campaign:
            case ObjectKind::note:
            case ObjectKind::report:
            case ObjectKind::intrusion_set:
                return;
            default:
                break;
        }
        if (!scenario_marker(*o).empty()) return;
        seen.insert(id);
        queue.push_back(id);
    };
    while (!queue.empty()) {
        const auto id = queue.front();
        queue.pop_front();
        for (const auto* r : g.edges_from(id)) enter(r->target);
        for (const auto* r : g.edges_to(id)) enter(r->source);
    }
    std::vector<const CesoObject*> out;
    for (const auto& id : seen) out.push_back(g.find(id));
    return out;
}

std::string required_string(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_string()) throw Error(Errc::parse_failure, where + ": '" + key + "' must be a string");
    return j[key].get<std::string>();
}

std::vector<std::string> string_list(const Json& j, const char* key, const std::string& where) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) throw Error(Errc::parse_failure, where + ": '" + key + "' must be a list of strings");
    for (const auto& e : j[key]) {
        if (!e.is_string()) throw Error(Errc::parse_failure, where + ": '" + key + "' must be a list of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::string folded(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Distinct by case-folded name, first spelling wins, folded order.
std::vector<std::string> distinct_names(const std::vector<std::string>& names) {
    std::map<std::string, std::string> by_key;
    for (const auto& n : names) by_key.emplace(folded(n), n);
    std::vector<std::string> out;
    for (const auto& [_, n] : by_key) out.push_back(n);
    return out;
}

std::string first_names(const CesoGraph& g, ObjectKind kind, std::size_t n = 3) {
    std::vector<std::string> all;
    for (const auto* o : g.of_kind(kind)) {
        if (is_inject(*o) || !scenario_marker(*o).empty()) continue;
        all.push_back(o->name);
    }
    auto names = distinct_names(all);
    if (names.size() > n) names.resize(n);
    return prose_list(names);
}

std::vector<std::string> victim_sectors(const CesoGraph& g) {
    std::set<std::string> sectors;
    for (const auto* o : g.of_kind(ObjectKind::identity)) {
        const auto it = o->properties.find("sectors");
        if (it == o->properties.end() || !it->is_array()) continue;
        for (const auto& s : *it) {
            if (s.is_string()) sectors.insert(s.get<std::string>());
        }
    }
    return {sectors.begin(), sectors.end()};
}

std::string actor_of(const CesoGraph& g) {
    auto actors = first_names(g, ObjectKind::threat_actor, 1);
    if (!actors.empty()) return actors;
    for (const auto* is : g.of_kind(ObjectKind::intrusion_set)) {
        if (is->name.rfind("Incident:", 0) != 0) return is->name;
    }
    return "An unidentified threat actor";
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::size_t word_count(const std::string& text) { return words_of(text).size(); }

// Cuts at the last sentence end that keeps the word budget, never inside the seed.
std::string truncate(const std::string& seed, const std::string& text, std::size_t max_words) {
    if (word_count(text) <= max_words) return text;
    std::string best = seed;
    for (std::size_t i = seed.size(); i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n')) {
            const auto candidate = text.substr(0, i + 1);
            if (word_count(candidate) > max_words) break;
            best = candidate;
        }
    }
    return best;
}

std::string template_continuation(const std::string& seed, const CesoGraph& g) {
    const auto sectors = victim_sectors(g);
    const auto target = sectors.empty() ? std::string("the exercise organisation") : prose_list(sectors) + " organisations";
    const auto techniques = first_names(g, ObjectKind::attack_pattern, 4);
    const auto malware = first_names(g, ObjectKind::malware);
    const auto vulns = first_names(g, ObjectKind::vulnerability);
    const auto tools = first_names(g, ObjectKind::tool);

    std::string out;
    const auto last = seed.find_last_not_of(" \n");
    const char tail = last == std::string::npos ? '.' : seed[last];
    if (tail != '.' && tail != '!' && tail != '?') {
        const auto words = words_of(seed);
        const bool named = seed.find(target) != std::string::npos;
        if (!words.empty() && words.back() == "to") {
            out += named ? " gain a foothold in their networks." : " gain a foothold in " + target + ".";
        } else {
            out += named ? "." : ", targeting " + target + ".";
        }
    }
    if (!techniques.empty()) out += " The operation relied on " + techniques + ".";
    if (!malware.empty()) out += " Once inside, the attackers deployed " + malware + ".";
    if (!vulns.empty()) out += " Unpatched weaknesses such as " + vulns + " gave them wider access.";
    if (!tools.empty()) out += " Systems running " + tools + " were the first to show signs of compromise.";
    out += " The response team must detect the intrusion, contain it and restore normal operations before ENDEX.";
    return out;
}

std::string run_external(const std::string& command, const std::string& seed) {
    if (command.empty()) throw Error(Errc::adapter_unavailable, "external synthesizer needs a command");
    const auto input = std::filesystem::temp_directory_path() /
                       ("cesoforge-seed-" + std::to_string(std::hash<std::string>{}(seed + command)) + ".txt");
    {
        std::ofstream f(input);
        f << seed;
        if (!f) throw Error(Errc::io_failure, "cannot write " + input.string());
    }
    const auto shell = "{ " + command + "\n} < '" + input.string() + "' 2>/dev/null";
    FILE* pipe = popen(shell.c_str(), "r");
    if (pipe == nullptr) throw Error(Errc::adapter_unavailable, "cannot start " + command);
    std::string out;
    std::array<char, 4096> buf{};
    for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0;) out.append(buf.data(), n);
    const int status = pclose(pipe);
    std::filesystem::remove(input);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw Error(Errc::adapter_unavailable, "synthesizer command failed: " + command);
    }
    while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    f.flush();
    if (!f) throw Error(Errc::io_failure, "cannot write " + path.string());
}

void msel_markdown(std::ostringstream& md, const MselNode& node, int indent) {
    for (const auto& child : node.children) {
        md << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "- **" << format_timing(child.timing) << "** "
           << child.level << ": " << child.name;
        if (child.difficulty) md << " (difficulty " << *child.difficulty << ")";
        md << "\n";
        msel_markdown(md, child, indent + 1);
    }
}

}  // namespace

// ---------------------------------------------------------------------------

void ScenarioSpec::check() const {
    if (name.empty()) throw Error(Errc::validation_error, "scenario name must be non-empty");
    if (events.empty()) throw Error(Errc::validation_error, "a scenario needs at least one event");
    for (const auto& e : events) {
        if (e.name.empty()) throw Error(Errc::validation_error, "event names must be non-empty");
        if (e.incidents.empty()) throw Error(Errc::validation_error, "event '" + e.name + "' has no incidents");
    }
    for (const auto& p : participants) {
        if (p.name.empty()) throw Error(Errc::validation_error, "participant names must be non-empty");
    }
    if (platform.empty()) throw Error(Errc::validation_error, "platform must be non-empty");
    if (storyline.seed && storyline.seed->empty()) throw Error(Errc::validation_error, "storyline seed must be non-empty");
    if (storyline.max_words == 0) throw Error(Errc::validation_error, "storyline max_words must be positive");
}

Json ScenarioSpec::to_json() const {
    Json events_j = Json::array();
    for (const auto& e : events) events_j.push_back({{"name", e.name}, {"description", e.description}, {"incidents", e.incidents}});
    Json parts = Json::array();
    for (const auto& p : participants) {
        Json pj{{"name", p.name}, {"recipient_group", p.recipient_group}};
        if (p.location) pj["location"] = *p.location;
        parts.push_back(std::move(pj));
    }
    Json story{{"synthesizer", storyline.synthesizer}, {"max_words", storyline.max_words}};
    if (storyline.seed) story["seed"] = *storyline.seed;
    if (!storyline.command.empty()) story["command"] = storyline.command;
    return {{"name", name},
            {"description", description},
            {"objectives", objectives},
            {"events", events_j},
            {"participants", parts},
            {"include_startex_endex", include_startex_endex},
            {"platform", platform},
            {"storyline", story}};
}

ScenarioSpec ScenarioSpec::from_json(const Json& j) {
    if (!j.is_object()) throw Error(Errc::parse_failure, "scenario spec must be a JSON object");
    ScenarioSpec s;
    s.name = required_string(j, "name", "spec");
    s.description = j.value("description", "");
    s.objectives = string_list(j, "objectives", "spec");
    if (!j.contains("events") || !j["events"].is_array()) throw Error(Errc::parse_failure, "spec: 'events' must be a list");
    for (std::size_t i = 0; i < j["events"].size(); ++i) {
        const auto& e = j["events"][i];
        const auto where = "spec.events[" + std::to_string(i) + "]";
        if (!e.is_object()) throw Error(Errc::parse_failure, where + " must be an object");
        s.events.push_back({required_string(e, "name", where), e.value("description", ""), string_list(e, "incidents", where)});
    }
    if (j.contains("participants")) {
        if (!j["participants"].is_array()) throw Error(Errc::parse_failure, "spec: 'participants' must be a list");
        for (std::size_t i = 0; i < j["participants"].size(); ++i) {
            const auto& p = j["participants"][i];
            const auto where = "spec.participants[" + std::to_string(i) + "]";
            if (!p.is_object()) throw Error(Errc::parse_failure, where + " must be an object");
            ParticipantSpec ps{required_string(p, "name", where), p.value("recipient_group", "players"), std::nullopt};
            if (p.contains("location")) ps.location = required_string(p, "location", where);
            s.participants.push_back(std::move(ps));
        }
    }
    if (j.contains("include_startex_endex")) {
        if (!j["include_startex_endex"].is_boolean()) throw Error(Errc::parse_failure, "spec: include_startex_endex must be boolean");
        s.include_startex_endex = j["include_startex_endex"].get<bool>();
    }
    s.platform = j.value("platform", s.platform);
    if (j.contains("storyline")) {
        const auto& st = j["storyline"];
        if (!st.is_object()) throw Error(Errc::parse_failure, "spec: storyline must be an object");
        if (st.contains("seed")) s.storyline.seed = required_string(st, "seed", "spec.storyline");
        s.storyline.synthesizer = st.value("synthesizer", s.storyline.synthesizer);
        s.storyline.command = st.value("command", "");
        if (st.contains("max_words")) {
            if (!st["max_words"].is_number_unsigned()) throw Error(Errc::parse_failure, "spec.storyline: max_words must be a positive integer");
            s.storyline.max_words = st["max_words"].get<std::size_t>();
        }
    }
    s.check();
    return s;
}

IncidentResolver store_resolver(const kdb::Store& store) {
    return [&store](std::string_view ref) -> std::optional<StoredIncident> {
        if (auto i = store.incident(ref)) return i;
        return store.incident_by_name(ref);
    };
}

CesoGraph build_scenario(const ScenarioSpec& spec, const IncidentResolver& resolve, ceso::IdFactory& ids) {
    spec.check();
    std::vector<std::vector<StoredIncident>> resolved;
    for (const auto& e : spec.events) {
        auto& row = resolved.emplace_back();
        for (const auto& ref : e.incidents) {
            auto inc = resolve(ref);
            if (!inc) throw Error(Errc::unresolved_incident, "event '" + e.name + "' references unknown incident '" + ref + "'");
            row.push_back(std::move(*inc));
        }
    }

    CesoGraph g;
    auto add = [&](ObjectKind kind, std::string name, Json props) {
        auto o = ceso::new_object(ids, kind, std::move(name), props);
        const auto id = o.id;
        g.insert(std::move(o));
        return id;
    };
    const auto grouping = add(ObjectKind::grouping, spec.name,
                              {{"description", spec.description},
                               {"scenario", spec.description.empty() ? spec.name : spec.description},
                               {"context", "cyber-exercise"}});
    for (std::size_t i = 0; i < spec.objectives.size(); ++i) {
        const auto note = add(ObjectKind::note, "Objective " + std::to_string(i + 1),
                              {{"description", spec.objectives[i]}, {"x_ceso_sequence", i + 1}});
        g.link(note, grouping, RelType::related_to, ids);
    }
    const auto sow = add(ObjectKind::report, "Statement of Work: " + spec.name,
                         {{"description", "Storyline pending."},
                          {"report_types", Json::array({"exercise-statement-of-work"})},
                          {"published", format_timestamp(ids.now())}});
    g.link(sow, grouping, RelType::related_to, ids);

    int start = 0;
    int last_inject = 0;
    for (std::size_t ei = 0; ei < spec.events.size(); ++ei) {
        const auto& e = spec.events[ei];
        const auto campaign = add(ObjectKind::campaign, e.name,
                                  {{"description", e.description.empty() ? "Event " + std::to_string(ei + 1) + " of " + spec.name : e.description},
                                   {"x_ceso_sequence", ei + 1},
                                   {"x_ceso_timing_offset", start}});
        g.link(campaign, grouping, RelType::related_to, ids);
        int event_end = start;
        for (std::size_t ii = 0; ii < resolved[ei].size(); ++ii) {
            const auto& draft = resolved[ei][ii].draft;
            std::map<std::string, std::string> remap;
            for (const auto& id : draft.graph.order()) {
                auto o = *draft.graph.find(id);
                o.id = ids.next(o.kind);
                remap[id] = o.id;
                if (is_inject(o)) {
                    const int t = start + timing_of(o);
                    o.properties["x_ceso_timing_offset"] = t;
                    event_end = std::max(event_end, t);
                }
                if (id == draft.root) {
                    o.properties["x_ceso_sequence"] = ii + 1;
                    o.properties["x_ceso_stored_incident"] = resolved[ei][ii].id;
                }
                g.insert(std::move(o));
            }
            for (const auto& [_, r] : draft.graph.relationships()) {
                auto copy = r;
                copy.id = ids.next(ObjectKind::relationship);
                copy.source = remap.at(r.source);
                copy.target = remap.at(r.target);
                g.insert_relationship(std::move(copy));
            }
            g.link(remap.at(draft.root), campaign, RelType::related_to, ids);
        }
        last_inject = std::max(last_inject, event_end);
        start = event_end;
    }

    if (spec.include_startex_endex) {
        const auto startex = add(ObjectKind::course_of_action, "STARTEX",
                                 {{"description", "Exercise start: participants receive the initial briefing."},
                                  {"x_ceso_scenario_inject", "STARTEX"},
                                  {"x_ceso_timing_offset", 0}});
        g.link(startex, grouping, RelType::related_to, ids);
        const auto endex = add(ObjectKind::course_of_action, "ENDEX",
                               {{"description", "Exercise end: play stops and the hot wash begins."},
                                {"x_ceso_scenario_inject", "ENDEX"},
                                {"x_ceso_timing_offset", last_inject + kEndexGap}});
        g.link(endex, grouping, RelType::related_to, ids);
    }

    const auto platform = add(ObjectKind::infrastructure, spec.platform,
                              {{"description", "Exercise platform hosting the scenario."},
                               {"infrastructure_types", Json::array({"workstation"})}});
    for (const auto& p : spec.participants) {
        const auto who = add(ObjectKind::identity, p.name,
                             {{"identity_class", "group"},
                              {"recipient_group", p.recipient_group.empty() ? "players" : p.recipient_group},
                              {"x_ceso_role", "participant"}});
        g.link(who, platform, RelType::uses, ids);
        if (p.location) {
            const auto where = add(ObjectKind::location, *p.location, {{"x_ceso_role", "participant-site"}});
            g.link(who, where, RelType::located_at, ids);
        }
    }

    Json refs = Json::array();
    for (const auto& id : g.order()) {
        if (id != grouping) refs.push_back(id);
    }
    g.find_mutable(grouping)->properties["object_refs"] = refs;

    if (const auto violations = ceso::check(g); !violations.empty()) {
        throw Error(Errc::validation_failure, violations.front().object_id + ": " + violations.front().reason);
    }
    return g;
}

std::string format_timing(int minutes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T+%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

MselNode emit_msel(const CesoGraph& g) {
    const auto groupings = g.of_kind(ObjectKind::grouping);
    if (groupings.empty()) throw Error(Errc::not_a_scenario_graph, "graph has no grouping root");
    const auto* root = groupings.front();
    MselNode scenario{"scenario", root->id, root->name, root->description, 0, std::nullopt, std::nullopt, std::nullopt, {}};
    for (const auto* coa : g.of_kind(ObjectKind::course_of_action)) {
        const auto marker = scenario_marker(*coa);
        if (marker == "STARTEX") scenario.startex = timing_of(*coa);
        if (marker == "ENDEX") scenario.endex = timing_of(*coa);
    }
    for (const auto* campaign : by_sequence(g.of_kind(ObjectKind::campaign))) {
        MselNode event{"event", campaign->id, campaign->name, campaign->description, timing_of(*campaign), std::nullopt,
                       std::nullopt, std::nullopt, {}};
        std::vector<const CesoObject*> incidents;
        for (const auto* r : g.edges_to(campaign->id)) {
            const auto* src = g.find(r->source);
            if (src && src->kind == ObjectKind::intrusion_set && r->type == RelType::related_to) incidents.push_back(src);
        }
        std::sort(incidents.begin(), incidents.end(), [](const CesoObject* a, const CesoObject* b) {
            if (sequence_of(*a) != sequence_of(*b)) return sequence_of(*a) < sequence_of(*b);
            return a->id < b->id;
        });
        for (const auto* is : incidents) {
            MselNode incident{"incident", is->id, is->name, is->description, event.timing, std::nullopt,
                              std::nullopt, std::nullopt, {}};
            std::vector<const CesoObject*> injects;
            for (const auto* o : incident_cluster(g, is->id)) {
                if (is_inject(*o)) injects.push_back(o);
            }
            std::sort(injects.begin(), injects.end(), [](const CesoObject* a, const CesoObject* b) {
                if (timing_of(*a) != timing_of(*b)) return timing_of(*a) < timing_of(*b);
                if (a->name != b->name) return a->name < b->name;
                return a->id < b->id;
            });
            if (!injects.empty()) incident.timing = timing_of(*injects.front());
            for (const auto* inj : injects) {
                incident.children.push_back({"inject", inj->id, inj->name, inj->description, timing_of(*inj),
                                             inj->extensions.difficulty, std::nullopt, std::nullopt, {}});
            }
            event.children.push_back(std::move(incident));
        }
        scenario.children.push_back(std::move(event));
    }
    return scenario;
}

Json to_json(const MselNode& n) {
    Json j{{"level", n.level}, {"ref", n.ref},         {"name", n.name},
           {"description", n.description}, {"timing_minutes", n.timing}, {"timing", format_timing(n.timing)}};
    if (n.difficulty) j["difficulty"] = *n.difficulty;
    if (n.startex) j["startex_minutes"] = *n.startex;
    if (n.endex) j["endex_minutes"] = *n.endex;
    Json children = Json::array();
    for (const auto& c : n.children) children.push_back(to_json(c));
    j["children"] = children;
    return j;
}

std::size_t depth(const MselNode& n) {
    std::size_t d = 0;
    for (const auto& c : n.children) d = std::max(d, depth(c));
    return d + 1;
}

std::string default_seed(const CesoGraph& g) {
    const auto sectors = victim_sectors(g);
    std::string technique;
    std::vector<std::string> aps;
    for (const auto* ap : g.of_kind(ObjectKind::attack_pattern)) aps.push_back(ap->name);
    std::sort(aps.begin(), aps.end());
    if (!aps.empty()) technique = upper(aps.front());
    std::string seed = actor_of(g) + " attacked " + (sectors.empty() ? std::string("the organisation") : prose_list(sectors) + " organisations");
    if (!technique.empty()) seed += " using " + technique;
    return seed + " to";
}

std::string generate_storyline(const StorylinePrompt& prompt, const CesoGraph& context) {
    if (prompt.seed_text.find_first_not_of(" \n\t") == std::string::npos) {
        throw Error(Errc::precondition_violation, "storyline seed must be non-empty");
    }
    std::string text;
    if (prompt.synthesizer == "template") {
        text = prompt.seed_text + template_continuation(prompt.seed_text, context);
    } else if (prompt.synthesizer == "external") {
        text = run_external(prompt.command, prompt.seed_text);
        if (text.rfind(prompt.seed_text, 0) != 0) text = prompt.seed_text + " " + text;
    } else {
        throw Error(Errc::adapter_unavailable, "no synthesizer named '" + prompt.synthesizer + "'");
    }
    return truncate(prompt.seed_text, text, prompt.max_words);
}

void attach_storyline(CesoGraph& g, const std::string& storyline) {
    for (const auto* r : g.of_kind(ObjectKind::report)) {
        g.find_mutable(r->id)->description = storyline;
    }
}

std::string render_markdown(const CesoGraph& g, const MselNode& msel, const std::string& storyline) {
    std::ostringstream md;
    md << "# " << msel.name << "\n\n";
    if (!msel.description.empty()) md << msel.description << "\n\n";

    md << "## Storyline (SoW)\n\n" << storyline << "\n\n";
    std::vector<const CesoObject*> notes = by_sequence(g.of_kind(ObjectKind::note));
    if (!notes.empty()) {
        md << "Objectives:\n\n";
        for (const auto* n : notes) md << "- " << n->description << "\n";
        md << "\n";
    }

    md << "## Scenario & MSEL\n\n";
    if (msel.startex) md << "- **" << format_timing(*msel.startex) << "** STARTEX\n";
    msel_markdown(md, msel, 0);
    if (msel.endex) md << "- **" << format_timing(*msel.endex) << "** ENDEX\n";
    md << "\n";
    for (const auto& event : msel.children) {
        for (const auto& incident : event.children) {
            for (const auto& inj : incident.children) {
                md << "### " << format_timing(inj.timing) << " " << inj.name << "\n\n" << inj.description << "\n\n";
            }
        }
    }

    md << "## Scenario Analysis\n\n";
    std::size_t events = msel.children.size(), incidents = 0, injects = 0;
    std::map<int, int> difficulty;
    for (const auto& e : msel.children) {
        incidents += e.children.size();
        for (const auto& i : e.children) {
            injects += i.children.size();
            for (const auto& inj : i.children) {
                if (inj.difficulty) ++difficulty[*inj.difficulty];
            }
        }
    }
    md << "- Events: " << events << "\n- Incidents: " << incidents << "\n- Injects: " << injects << "\n";
    if (msel.endex) md << "- Planned duration: " << format_timing(*msel.endex) << "\n";
    if (!difficulty.empty()) {
        std::vector<std::string> parts;
        for (const auto& [d, n] : difficulty) parts.push_back(std::to_string(d) + ": " + std::to_string(n));
        md << "- Inject difficulty: " << join(parts) << "\n";
    }
    md << "\n| Kill-chain phase | Techniques |\n|---|---|\n";
    for (const auto phase : ceso::kKillChainPhases) {
        std::vector<std::string> names;
        for (const auto* ap : g.of_kind(ObjectKind::attack_pattern)) {
            const auto labels = ceso::kill_chain_labels(*ap);
            if (std::find(labels.begin(), labels.end(), phase) != labels.end()) names.push_back(ap->name);
        }
        names = distinct_names(names);
        md << "| " << phase << " | " << (names.empty() ? std::string("-") : join(names)) << " |\n";
    }
    const auto actors = first_names(g, ObjectKind::threat_actor, 10);
    const auto malware = first_names(g, ObjectKind::malware, 10);
    const auto vulns = first_names(g, ObjectKind::vulnerability, 10);
    const auto sectors = victim_sectors(g);
    md << "\n- Threat actors: " << (actors.empty() ? "none" : actors) << "\n";
    md << "- Malware: " << (malware.empty() ? "none" : malware) << "\n";
    md << "- Vulnerabilities: " << (vulns.empty() ? "none" : vulns) << "\n";
    md << "- Targeted sectors: " << (sectors.empty() ? "none" : prose_list(sectors)) << "\n\n";

    md << "## Resources Used\n\n";
    for (const auto* infra : g.of_kind(ObjectKind::infrastructure)) md << "- Platform: " << infra->name << "\n";
    for (const auto* id : g.of_kind(ObjectKind::identity)) {
        if (!id->extensions.recipient_group) continue;
        md << "- Participant: " << id->name << " (" << *id->extensions.recipient_group << ")";
        for (const auto* r : g.edges_from(id->id)) {
            if (r->type == RelType::located_at) md << ", " << g.find(r->target)->name;
        }
        md << "\n";
    }
    std::set<std::string> articles, groups;
    for (const auto& [_, o] : g.objects()) {
        const auto it = o.properties.find("x_ceso_provenance");
        if (it == o.properties.end() || !it->is_array()) continue;
        for (const auto& p : *it) {
            if (!p.is_string()) continue;
            const auto s = p.get<std::string>();
            if (s.rfind("article:", 0) == 0) articles.insert(s.substr(8));
            if (s.rfind("apt:", 0) == 0) groups.insert(s.substr(4));
        }
    }
    md << "- Source articles: " << (articles.empty() ? std::string("none") : join({articles.begin(), articles.end()})) << "\n";
    md << "- APT profiles: " << (groups.empty() ? std::string("none") : join({groups.begin(), groups.end()})) << "\n";
    return md.str();
}

ExportPaths export_exercise(const CesoGraph& graph, const MselNode& msel, const std::string& storyline,
                            const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::io_failure, "cannot create " + out_dir.string() + ": " + ec.message());
    ExportPaths p{out_dir / "bundle.json", out_dir / "scenario.md", out_dir / "msel.json"};
    write_file(p.bundle, ceso::serialize_bundle(graph) + "\n");
    write_file(p.markdown, render_markdown(graph, msel, storyline));
    write_file(p.msel, to_json(msel).dump(2) + "\n");
    return p;
}

StoredScenario generate(const ScenarioSpec& spec, kdb::Store& store, ceso::IdFactory& ids,
                        const std::optional<std::filesystem::path>& out_dir) {
    auto graph = build_scenario(spec, store_resolver(store), ids);
    StorylinePrompt prompt;
    prompt.seed_text = spec.storyline.seed ? *spec.storyline.seed : default_seed(graph);
    prompt.max_words = spec.storyline.max_words;
    prompt.synthesizer = spec.storyline.synthesizer;
    prompt.command = spec.storyline.command;
    const auto storyline = generate_storyline(prompt, graph);
    attach_storyline(graph, storyline);
    const auto msel = emit_msel(graph);

    StoredScenario s;
    s.id = graph.of_kind(ObjectKind::grouping).front()->id;
    s.name = spec.name;
    s.created = ids.now();
    s.spec = spec.to_json();
    s.graph = graph;
    s.storyline = storyline;
    store.put_scenario(s);
    if (out_dir) export_exercise(graph, msel, storyline, *out_dir);
    return s;
}

}  // namespace cesoforge::cegen
