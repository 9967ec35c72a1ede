#include "cesoforge/apt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "cesoforge/errors.hpp"
#include "cesoforge/incgen.hpp"

namespace cesoforge::apt {

using ceso::CesoGraph;
using ceso::CesoObject;
using ceso::Json;
using ceso::ObjectKind;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<Comparator> parse_comparator(std::string_view s) {
    if (s == "exact") return Comparator::exact;
    if (s == "token-set") return Comparator::token_set;
    if (s == "edit-distance" || s == "normalized-edit-distance") return Comparator::edit_distance;
    return std::nullopt;
}

std::optional<Json> property_of(const CesoObject& o, const std::string& key) {
    if (key == "name") return o.name.empty() ? std::nullopt : std::optional<Json>(o.name);
    if (key == "description") {
        return o.description.empty() ? std::nullopt : std::optional<Json>(o.description);
    }
    const auto it = o.properties.find(key);
    if (it == o.properties.end() || it->is_null()) return std::nullopt;
    return *it;
}

Json canonical(const Json& v) {
    if (v.is_string()) return lower(trim(v.get<std::string>()));
    if (v.is_array()) {
        std::set<std::string> items;
        for (const auto& e : v) items.insert(canonical(e).dump());
        return Json(items);
    }
    if (v.is_object()) {
        Json out = Json::object();
        for (const auto& [k, e] : v.items()) out[k] = canonical(e);
        return out;
    }
    return v;
}

void collect_text(const Json& v, std::vector<std::string>& out) {
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
    } else if (v.is_array() || v.is_object()) {
        for (const auto& e : v) collect_text(e, out);
    } else if (!v.is_null()) {
        out.push_back(v.dump());
    }
}

std::set<std::string> tokens(const Json& v) {
    std::vector<std::string> texts;
    collect_text(v, texts);
    std::set<std::string> out;
    for (const auto& t : texts) {
        std::string cur;
        for (char c : t) {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            } else if (!cur.empty()) {
                out.insert(std::move(cur));
                cur.clear();
            }
        }
        if (!cur.empty()) out.insert(std::move(cur));
    }
    return out;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const auto up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

double match(const std::optional<Json>& a, const std::optional<Json>& b, const PropertyRule& rule) {
    if (!a && !b) return 1.0;
    if (!a || !b) return 0.0;
    switch (rule.comparator) {
        case Comparator::exact:
            return canonical(*a) == canonical(*b) ? 1.0 : 0.0;
        case Comparator::token_set: {
            const auto ta = tokens(*a);
            const auto tb = tokens(*b);
            if (ta.empty() && tb.empty()) return 1.0;
            std::size_t common = 0;
            for (const auto& t : ta) common += tb.count(t);
            return static_cast<double>(common) / static_cast<double>(ta.size() + tb.size() - common);
        }
        case Comparator::edit_distance: {
            std::vector<std::string> pa, pb;
            collect_text(*a, pa);
            collect_text(*b, pb);
            std::string sa, sb;
            for (const auto& s : pa) sa += (sa.empty() ? "" : " ") + lower(trim(s));
            for (const auto& s : pb) sb += (sb.empty() ? "" : " ") + lower(trim(s));
            const auto longest = std::max(sa.size(), sb.size());
            if (longest == 0) return 1.0;
            const double sim = 1.0 - static_cast<double>(levenshtein(sa, sb)) / static_cast<double>(longest);
            return sim >= rule.threshold ? 1.0 : 0.0;
        }
    }
    return 0.0;
}

std::vector<PropertyRule> name_only() { return {{"name", 100, Comparator::token_set, 0.8}}; }

std::string group_external_id(const CesoObject& o) {
    const auto it = o.properties.find("external_references");
    if (it != o.properties.end() && it->is_array()) {
        for (const auto& ref : *it) {
            if (ref.is_object() && ref.value("source_name", "") == "mitre-attack" && ref.contains("external_id") &&
                ref["external_id"].is_string()) {
                return ref["external_id"].get<std::string>();
            }
        }
    }
    return o.id;
}

bool retired(const CesoObject& o) {
    return o.properties.value("revoked", false) || o.properties.value("x_mitre_deprecated", false);
}

std::set<std::string> reachable_from_roots(const CesoGraph& g) {
    std::set<std::string> seen;
    std::deque<std::string> queue;
    for (const auto* is : g.of_kind(ObjectKind::intrusion_set)) {
        seen.insert(is->id);
        queue.push_back(is->id);
    }
    while (!queue.empty()) {
        const auto id = queue.front();
        queue.pop_front();
        for (const auto* r : g.edges_from(id)) {
            if (seen.insert(r->target).second) queue.push_back(r->target);
        }
        for (const auto* r : g.edges_to(id)) {
            if (seen.insert(r->source).second) queue.push_back(r->source);
        }
    }
    return seen;
}

bool keeps_phase(const CesoObject& ap, const std::set<std::string>& phases) {
    const auto labels = ceso::kill_chain_labels(ap);
    if (labels.empty()) {
        static const auto every = all_phases();
        return std::includes(phases.begin(), phases.end(), every.begin(), every.end());
    }
    return std::any_of(labels.begin(), labels.end(), [&](const std::string& l) { return phases.contains(l); });
}

void add_provenance(CesoObject& o, const std::string& tag) {
    auto& prov = o.properties["x_ceso_provenance"];
    if (!prov.is_array()) prov = Json::array();
    if (std::find(prov.begin(), prov.end(), Json(tag)) == prov.end()) prov.push_back(tag);
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<PropertyRule>& SimilarityConfig::rules_for(ObjectKind kind) const {
    const auto it = tables.find(kind);
    return it == tables.end() ? fallback : it->second;
}

void SimilarityConfig::check() const {
    auto check_table = [](std::string_view label, const std::vector<PropertyRule>& rules) {
        double sum = 0;
        for (const auto& r : rules) {
            if (r.weight < 0) throw Error(Errc::invalid_property, std::string(label) + "." + r.property + ": negative weight");
            if (r.comparator == Comparator::edit_distance && (r.threshold <= 0 || r.threshold > 1)) {
                throw Error(Errc::invalid_property, std::string(label) + "." + r.property + ": threshold outside (0, 1]");
            }
            sum += r.weight;
        }
        if (std::abs(sum - 100.0) > 1e-9) {
            throw Error(Errc::invalid_property, std::string(label) + ": weights sum to " + std::to_string(sum) + ", not 100");
        }
    };
    for (const auto& [kind, rules] : tables) check_table(ceso::to_string(kind), rules);
    check_table("default", fallback);
}

SimilarityConfig SimilarityConfig::defaults() {
    SimilarityConfig cfg;
    cfg.tables[ObjectKind::attack_pattern] = {{"name", 70, Comparator::token_set, 0.8},
                                              {"external_references", 30, Comparator::exact, 0.8}};
    cfg.tables[ObjectKind::malware] = {{"name", 80, Comparator::token_set, 0.8},
                                       {"malware_types", 20, Comparator::token_set, 0.8}};
    cfg.fallback = name_only();
    return cfg;
}

SimilarityConfig SimilarityConfig::parse(std::string_view text) {
    SimilarityConfig cfg;
    bool have_fallback = false;
    std::istringstream in{std::string(text)};
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto where = "similarity config line " + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        const auto key = trim(line.substr(0, eq == std::string::npos ? 0 : eq));
        const auto dot = key.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
            throw Error(Errc::parse_failure, where + "expected kind.property = weight comparator [threshold]");
        }
        std::istringstream value(line.substr(eq + 1));
        PropertyRule rule;
        rule.property = key.substr(dot + 1);
        std::string comparator;
        if (!(value >> rule.weight >> comparator)) throw Error(Errc::parse_failure, where + "missing weight or comparator");
        const auto cmp = parse_comparator(comparator);
        if (!cmp) throw Error(Errc::parse_failure, where + "unknown comparator " + comparator);
        rule.comparator = *cmp;
        if (double t = 0; value >> t) rule.threshold = t;
        const auto kind_name = key.substr(0, dot);
        if (kind_name == "default") {
            if (!have_fallback) cfg.fallback.clear();
            have_fallback = true;
            cfg.fallback.push_back(std::move(rule));
            continue;
        }
        const auto kind = ceso::parse_kind(kind_name);
        if (!kind || *kind == ObjectKind::relationship) throw Error(Errc::parse_failure, where + "unknown kind " + kind_name);
        cfg.tables[*kind].push_back(std::move(rule));
    }
    if (!have_fallback) cfg.fallback = name_only();
    cfg.check();
    return cfg;
}

SimilarityConfig SimilarityConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_failure, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::set<std::string> all_phases() {
    return {ceso::kKillChainPhases.begin(), ceso::kKillChainPhases.end()};
}

std::optional<std::string_view> phase_for_tactic(std::string_view tactic) noexcept {
    static constexpr std::pair<std::string_view, std::string_view> kMap[]{
        {"reconnaissance", "reconnaissance"},
        {"resource-development", "weaponization"},
        {"initial-access", "delivery"},
        {"execution", "exploitation"},
        {"privilege-escalation", "exploitation"},
        {"persistence", "installation"},
        {"defense-evasion", "installation"},
        {"credential-access", "actions-on-objectives"},
        {"discovery", "actions-on-objectives"},
        {"lateral-movement", "actions-on-objectives"},
        {"collection", "actions-on-objectives"},
        {"command-and-control", "command-and-control"},
        {"exfiltration", "actions-on-objectives"},
        {"impact", "actions-on-objectives"},
    };
    for (const auto& [t, p] : kMap) {
        if (t == tactic) return p;
    }
    return std::nullopt;
}

std::vector<AptProfile> ingest_attack(const Json& bundle, std::vector<std::string>* warnings) {
    const auto source = ceso::graph_from_json(bundle, ceso::ParseMode::foreign);
    auto warn = [&](std::string w) {
        if (warnings) warnings->push_back(std::move(w));
    };
    std::vector<AptProfile> out;
    for (const auto* group : source.of_kind(ObjectKind::intrusion_set)) {
        if (retired(*group)) continue;
        AptProfile p;
        p.group_id = group_external_id(*group);
        p.name = group->name;
        if (const auto it = group->properties.find("aliases"); it != group->properties.end() && it->is_array()) {
            for (const auto& a : *it) {
                if (a.is_string() && a.get<std::string>() != p.name) p.aliases.push_back(a.get<std::string>());
            }
        }
        const auto tag = "apt:" + p.group_id;
        auto root = *group;
        add_provenance(root, tag);
        p.graph.insert(std::move(root));

        std::deque<std::string> queue{group->id};
        std::size_t techniques = 0;
        while (!queue.empty()) {
            const auto id = queue.front();
            queue.pop_front();
            for (const auto* r : source.edges_from(id)) {
                if (r->type != ceso::RelType::uses || p.graph.contains(r->target)) continue;
                const auto* target = source.find(r->target);
                if (target == nullptr || retired(*target) ||
                    std::find(kTtpKinds.begin(), kTtpKinds.end(), target->kind) == kTtpKinds.end()) {
                    continue;
                }
                auto copy = *target;
                if (copy.kind == ObjectKind::attack_pattern) {
                    if (const auto it = copy.properties.find("kill_chain_phases"); it != copy.properties.end() && it->is_array()) {
                        std::vector<std::string> mapped;
                        for (const auto& ph : *it) {
                            if (!ph.is_object() || ph.value("kill_chain_name", "") != "mitre-attack") continue;
                            if (auto lm = phase_for_tactic(ph.value("phase_name", ""))) mapped.emplace_back(*lm);
                        }
                        for (const auto& m : mapped) ceso::add_kill_chain_label(copy, m);
                    }
                    if (ceso::kill_chain_labels(copy).empty()) {
                        warn(p.name + ": technique " + copy.name + " has no mappable tactic; skipped");
                        continue;
                    }
                    ++techniques;
                }
                add_provenance(copy, tag);
                p.graph.insert(std::move(copy));
                queue.push_back(r->target);
            }
        }
        for (const auto& [_, r] : source.relationships()) {
            if (p.graph.contains(r.source) && p.graph.contains(r.target)) p.graph.insert_relationship(r);
        }
        if (techniques == 0) warn(p.name + ": no techniques");
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<AptProfile> ingest_attack_text(std::string_view text, std::vector<std::string>* warnings) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw Error(Errc::malformed_bundle, std::string("not JSON: ") + e.what());
    }
    return ingest_attack(j, warnings);
}

double object_similarity(const CesoObject& a, const CesoObject& b, const SimilarityConfig& cfg) {
    if (a.kind != b.kind) return 0.0;
    double score = 0;
    for (const auto& rule : cfg.rules_for(a.kind)) {
        score += rule.weight * match(property_of(a, rule.property), property_of(b, rule.property), rule);
    }
    return std::clamp(score, 0.0, 100.0);
}

double graph_similarity(const CesoGraph& g1, const CesoGraph& g2, const SimilarityConfig& cfg) {
    double matched = 0;
    std::size_t units = 0;
    for (const auto kind : ceso::kAllKinds) {
        const auto a = g1.of_kind(kind);
        const auto b = g2.of_kind(kind);
        units += std::max(a.size(), b.size());
        if (a.empty() || b.empty()) continue;
        std::vector<std::string> fa, fb;
        for (const auto* o : a) fa.push_back(ceso::to_stix(*o).dump());
        for (const auto* o : b) fb.push_back(ceso::to_stix(*o).dump());
        struct Pair {
            double score;
            std::string lo, hi;
            std::size_t i, j;
        };
        std::vector<Pair> pairs;
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (std::size_t j = 0; j < b.size(); ++j) {
                const auto s = object_similarity(*a[i], *b[j], cfg);
                if (s <= 0) continue;
                pairs.push_back({s, std::min(fa[i], fb[j]), std::max(fa[i], fb[j]), i, j});
            }
        }
        // The tie-break depends only on the unordered pair, so swapping graphs
        // selects the same matching.
        std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
            if (x.score != y.score) return x.score > y.score;
            if (x.lo != y.lo) return x.lo < y.lo;
            return x.hi < y.hi;
        });
        std::vector<bool> used_a(a.size()), used_b(b.size());
        for (const auto& p : pairs) {
            if (used_a[p.i] || used_b[p.j]) continue;
            used_a[p.i] = used_b[p.j] = true;
            matched += p.score;
        }
    }
    return units == 0 ? 0.0 : matched / static_cast<double>(units);
}

CesoGraph project(const CesoGraph& graph, std::span<const ObjectKind> kinds) {
    CesoGraph out;
    for (const auto& id : graph.order()) {
        const auto* o = graph.find(id);
        if (o && std::find(kinds.begin(), kinds.end(), o->kind) != kinds.end()) out.insert(*o);
    }
    for (const auto& [_, r] : graph.relationships()) {
        if (out.contains(r.source) && out.contains(r.target)) out.insert_relationship(r);
    }
    return out;
}

std::vector<Ranked> rank_apts(const IncidentDraft& draft, const std::vector<AptProfile>& profiles,
                              const SimilarityConfig& cfg) {
    const auto mine = project(draft.graph, kTtpKinds);
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        out.push_back({i, profiles[i].group_id, profiles[i].name,
                       graph_similarity(mine, project(profiles[i].graph, kTtpKinds), cfg)});
    }
    std::stable_sort(out.begin(), out.end(), [](const Ranked& x, const Ranked& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.name < y.name;
    });
    return out;
}

IncidentDraft merge(const IncidentDraft& base, const AptProfile& donor, ceso::IdFactory& ids,
                    const MergeOptions& opt) {
    if (opt.phases) {
        for (const auto& ph : *opt.phases) {
            if (!ceso::is_kill_chain_phase(ph)) throw Error(Errc::precondition_violation, "unknown kill-chain phase " + ph);
        }
    }
    const auto roots = donor.graph.of_kind(ObjectKind::intrusion_set);
    if (roots.empty()) throw Error(Errc::precondition_violation, donor.name + ": profile has no intrusion-set");
    const auto donor_root = roots.front()->id;

    std::set<std::string> selection;
    if (opt.fragment) {
        for (const auto& id : *opt.fragment) {
            if (!donor.graph.contains(id)) throw Error(Errc::unknown_fragment_id, id + " is not in " + donor.name);
            if (id != donor_root) selection.insert(id);
        }
    } else {
        for (const auto& [id, _] : donor.graph.objects()) {
            if (id != donor_root) selection.insert(id);
        }
    }
    if (opt.phases) {
        std::set<std::string> kept;
        for (const auto& id : selection) {
            const auto* o = donor.graph.find(id);
            if (o->kind == ObjectKind::attack_pattern && keeps_phase(*o, *opt.phases)) kept.insert(id);
        }
        for (const auto& id : selection) {
            if (donor.graph.kind_of(id) == ObjectKind::attack_pattern) continue;
            bool adjacent = false;
            for (const auto* r : donor.graph.edges_from(id)) adjacent |= kept.contains(r->target);
            for (const auto* r : donor.graph.edges_to(id)) adjacent |= kept.contains(r->source);
            if (adjacent) kept.insert(id);
        }
        selection = std::move(kept);
    }
    if (selection.empty()) throw Error(Errc::empty_selection, "no donor objects selected from " + donor.name);

    IncidentDraft out = base;
    const auto tag = "apt:" + donor.group_id;
    std::map<std::string, std::string> mapped{{donor_root, out.root}};
    for (const auto& id : donor.graph.order()) {
        if (!selection.contains(id)) continue;
        const auto* o = donor.graph.find(id);
        const auto key = lower(trim(o->name));
        std::string existing;
        for (const auto* b : out.graph.of_kind(o->kind)) {
            if (lower(trim(b->name)) == key) {
                existing = b->id;
                break;
            }
        }
        if (!existing.empty()) {
            add_provenance(*out.graph.find_mutable(existing), tag);
            mapped[id] = existing;
            continue;
        }
        auto copy = *o;
        copy.id = ids.next(o->kind);
        copy.created = copy.modified = ids.now();
        copy.properties["x_ceso_provenance"] = Json::array({tag});
        mapped[id] = copy.id;
        out.graph.insert(std::move(copy));
    }
    for (const auto& [_, r] : donor.graph.relationships()) {
        const auto s = mapped.find(r.source);
        const auto t = mapped.find(r.target);
        if (s == mapped.end() || t == mapped.end() || s->second == t->second) continue;
        if (out.graph.has_edge(s->second, t->second, r.type)) continue;
        out.graph.link(s->second, t->second, r.type, ids, ceso::LinkMode::allow_nonstandard);
    }
    incgen::connect_orphans(out.graph, out.root, ids);
    if (std::find(out.provenance.begin(), out.provenance.end(), tag) == out.provenance.end()) {
        out.provenance.push_back(tag);
    }
    incgen::validate_draft(out);
    return out;
}

CesoGraph filter_kill_chain(const CesoGraph& graph, const std::set<std::string>& phases) {
    CesoGraph g = graph;
    std::set<std::string> removed;
    for (const auto* ap : g.of_kind(ObjectKind::attack_pattern)) {
        if (!keeps_phase(*ap, phases)) removed.insert(ap->id);
    }
    // Objects attached to a technique live and die with their techniques.
    std::vector<std::string> drop;
    for (const auto& [id, o] : g.objects()) {
        if (o.kind == ObjectKind::attack_pattern || o.kind == ObjectKind::intrusion_set) continue;
        bool bound = false, alive = false;
        auto visit = [&](const std::string& other) {
            if (g.kind_of(other) != ObjectKind::attack_pattern) return;
            bound = true;
            alive |= !removed.contains(other);
        };
        for (const auto* r : g.edges_from(id)) visit(r->target);
        for (const auto* r : g.edges_to(id)) visit(r->source);
        if (bound && !alive) drop.push_back(id);
    }
    for (const auto& id : removed) g.erase(id);
    for (const auto& id : drop) g.erase(id);
    const auto keep = reachable_from_roots(g);
    drop.clear();
    for (const auto& [id, _] : g.objects()) {
        if (!keep.contains(id)) drop.push_back(id);
    }
    for (const auto& id : drop) g.erase(id);
    return g;
}

IncidentDraft filter_kill_chain(const IncidentDraft& draft, const std::set<std::string>& phases) {
    IncidentDraft out = draft;
    out.graph = filter_kill_chain(draft.graph, phases);
    std::erase_if(out.injects, [&](const InjectPlan& p) { return !out.graph.contains(p.course_of_action); });
    for (auto& p : out.injects) {
        std::erase_if(p.carriers, [&](const std::string& id) { return !out.graph.contains(id); });
    }
    return out;
}

}  // namespace cesoforge::apt
