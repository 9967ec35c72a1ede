#include "cesoforge/incgen.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "cesoforge/errors.hpp"
#include "cesoforge/hashing.hpp"

namespace cesoforge::incgen {

using ceso::CesoGraph;
using ceso::Json;
using ceso::ObjectKind;
using ceso::RelType;

namespace {

std::string humanize(std::string_view tag) {
    std::string out(tag);
    std::replace(out.begin(), out.end(), '-', ' ');
    std::replace(out.begin(), out.end(), '_', ' ');
    return out.empty() ? std::string("untitled") : out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep = ", ") {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

std::set<std::string> component_of(const CesoGraph& g, const std::string& start) {
    std::set<std::string> seen{start};
    std::deque<std::string> queue{start};
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

RelType orphan_edge(ObjectKind kind) {
    switch (kind) {
        case ObjectKind::attack_pattern:
        case ObjectKind::malware:
        case ObjectKind::infrastructure:
            return RelType::uses;
        case ObjectKind::tool:
        case ObjectKind::vulnerability:
        case ObjectKind::identity:
            return RelType::targets;
        case ObjectKind::threat_actor:
            return RelType::attributed_to;
        default:
            return RelType::related_to;
    }
}

bool is_inject(const ceso::CesoObject& o) {
    return o.kind == ObjectKind::course_of_action && o.properties.value("x_ceso_inject", false);
}

std::vector<std::string> names_of(const CesoGraph& g, const std::vector<std::string>& ids) {
    std::vector<std::string> out;
    for (const auto& id : ids) {
        if (const auto* o = g.find(id)) out.push_back(o->name);
    }
    return out;
}

}  // namespace

IncidentDraft draft_from_breadcrumb(const Breadcrumb& b, ceso::IdFactory& ids, const DraftOptions& opt) {
    const bool mature = tagger::is_mature(b.maturity, opt.threshold);
    if (!mature && !opt.allow_immature) {
        throw Error(Errc::immature_source, "breadcrumb " + b.article_id + " has maturity " +
                                               std::to_string(b.maturity) + " below threshold " +
                                               std::to_string(opt.threshold));
    }
    IncidentDraft d;
    d.name_tag = b.name_tag;
    d.graph = b.fragment;
    d.provenance = {b.article_id};
    d.maturity = b.maturity;
    d.low_maturity = !mature;
    d.topics = b.topics;
    d.tags = b.tags;

    std::vector<std::string> techniques;
    for (const auto* ap : d.graph.of_kind(ObjectKind::attack_pattern)) techniques.push_back(ap->name);
    Json props{{"description", "Incident drafted from article " + b.article_id +
                                   (techniques.empty() ? std::string() : " involving " + join(techniques)) + "."},
               {"x_ceso_provenance", Json::array({"rule:incident-root", "article:" + b.article_id})}};
    auto root = ceso::new_object(ids, ObjectKind::intrusion_set, "Incident: " + humanize(b.name_tag), props);
    d.root = root.id;
    d.graph.insert(std::move(root));

    for (const auto kind : {ObjectKind::attack_pattern, ObjectKind::tool, ObjectKind::vulnerability}) {
        const auto type = kind == ObjectKind::attack_pattern ? RelType::uses : RelType::targets;
        for (const auto* o : d.graph.of_kind(kind)) d.graph.link(d.root, o->id, type, ids);
    }
    connect_orphans(d.graph, d.root, ids);
    d.injects = scaffold_injects(d.graph, ids, 0, opt);
    validate_draft(d);
    return d;
}

IncidentDraft draft_from_text(std::string_view text, std::string name_tag, const tagger::Resources& res,
                              ceso::IdFactory& ids, const DraftOptions& opt) {
    ArticleRecord a;
    a.id = "adhoc-" + hex64(fnv1a64(text));
    a.source = "adhoc";
    a.normalized_text = std::string(text);
    a.raw_text = a.normalized_text;
    a.name_tag = name_tag.empty() ? std::string("adhoc") : std::move(name_tag);
    a.published = date_of(ids.now());
    const auto tags = tagger::tag_text(a.normalized_text, res.gazetteers, a.id);
    return draft_from_breadcrumb(tagger::to_breadcrumb(a, tags, res, ids), ids, opt);
}

std::vector<IncidentDraft> draft_from_query(const kdb::Store& store, const kdb::QueryFilter& filter,
                                            std::size_t k, ceso::IdFactory& ids, const DraftOptions& opt) {
    if (k < 1) throw Error(Errc::precondition_violation, "k must be at least 1");
    std::vector<IncidentDraft> out;
    for (const auto& b : store.query(filter)) {
        if (out.size() == k) break;
        if (!opt.allow_immature && !tagger::is_mature(b.maturity, opt.threshold)) continue;
        out.push_back(draft_from_breadcrumb(b, ids, opt));
    }
    if (out.empty()) throw Error(Errc::no_candidates, "no mature breadcrumb matches the filter");
    return out;
}

std::vector<InjectPlan> scaffold_injects(CesoGraph& g, ceso::IdFactory& ids, int start_offset,
                                         const DraftOptions& opt, const std::string& provenance) {
    std::vector<InjectPlan> plans;
    int offset = start_offset;
    for (const auto* ap : g.of_kind(ObjectKind::attack_pattern)) {
        const auto incoming = g.edges_to(ap->id);
        const bool covered = std::any_of(incoming.begin(), incoming.end(), [&](const ceso::Relationship* r) {
            const auto* src = g.find(r->source);
            return r->type == RelType::mitigates && src != nullptr && is_inject(*src);
        });
        if (covered) continue;

        std::vector<std::string> malware, vulns, indicators;
        for (const auto* r : g.edges_from(ap->id)) {
            if (r->type == RelType::delivers) malware.push_back(r->target);
            if (r->type == RelType::exploits) vulns.push_back(r->target);
            if (r->type == RelType::indicates) indicators.push_back(r->target);
        }
        std::string description = "Players receive indications of " + ap->name + " activity";
        if (!malware.empty()) description += " delivering " + join(names_of(g, malware));
        if (!vulns.empty()) description += " exploiting " + join(names_of(g, vulns));
        description += ". They must detect, contain and report it.";

        offset += opt.inject_spacing;
        const Json props{{"description", description},
                         {"difficulty", opt.difficulty},
                         {"x_ceso_inject", true},
                         {"x_ceso_timing_offset", offset},
                         {"x_ceso_provenance", Json::array({provenance})}};
        auto coa = ceso::new_object(ids, ObjectKind::course_of_action, "Respond to " + ap->name, props);
        const auto coa_id = coa.id;
        const auto ap_id = ap->id;
        g.insert(std::move(coa));
        g.link(coa_id, ap_id, RelType::mitigates, ids);
        for (const auto& v : vulns) g.link(coa_id, v, RelType::mitigates, ids);

        InjectPlan plan;
        plan.title = "Respond to " + g.find(ap_id)->name;
        plan.description = description;
        plan.timing_offset = offset;
        plan.difficulty = opt.difficulty;
        plan.course_of_action = coa_id;
        plan.carriers.push_back(ap_id);
        plan.carriers.insert(plan.carriers.end(), malware.begin(), malware.end());
        plan.carriers.insert(plan.carriers.end(), indicators.begin(), indicators.end());
        plan.carriers.push_back(coa_id);
        plans.push_back(std::move(plan));
    }
    return plans;
}

void connect_orphans(CesoGraph& g, const std::string& root, ceso::IdFactory& ids) {
    auto reached = component_of(g, root);
    const std::vector<std::string> order = g.order();
    for (const auto& id : order) {
        if (reached.contains(id)) continue;
        const auto* o = g.find(id);
        if (o == nullptr) continue;
        g.link(root, id, orphan_edge(o->kind), ids, ceso::LinkMode::allow_nonstandard);
        for (const auto& r : component_of(g, id)) reached.insert(r);
    }
}

void validate_draft(const IncidentDraft& d) {
    ceso::validate(d.graph);
    const auto roots = d.graph.of_kind(ObjectKind::intrusion_set);
    if (roots.size() != 1 || roots.front()->id != d.root) {
        throw Error(Errc::invariant_violation, "a draft must contain exactly one intrusion-set, its root");
    }
    for (const auto& inj : d.injects) {
        if (inj.difficulty < 1 || inj.difficulty > 5) {
            throw Error(Errc::invariant_violation, inj.title + ": difficulty outside [1, 5]");
        }
        if (inj.timing_offset < 0) throw Error(Errc::invariant_violation, inj.title + ": negative timing offset");
        const auto* coa = d.graph.find(inj.course_of_action);
        if (coa == nullptr || coa->kind != ObjectKind::course_of_action) {
            throw Error(Errc::invariant_violation, inj.title + ": inject course-of-action missing");
        }
        const auto out = d.graph.edges_from(coa->id);
        const bool mitigates = std::any_of(out.begin(), out.end(), [&](const ceso::Relationship* r) {
            const auto tk = d.graph.kind_of(r->target);
            return r->type == RelType::mitigates &&
                   (tk == ObjectKind::attack_pattern || tk == ObjectKind::vulnerability);
        });
        if (!mitigates) {
            throw Error(Errc::invariant_violation, inj.title + ": inject does not mitigate any technique");
        }
        if (coa->extensions.difficulty != inj.difficulty) {
            throw Error(Errc::invariant_violation, inj.title + ": difficulty out of sync with its object");
        }
    }
}

std::vector<std::string> untraced_objects(const CesoGraph& g) {
    std::vector<std::string> out;
    for (const auto& [id, o] : g.objects()) {
        const auto it = o.properties.find("x_ceso_provenance");
        if (it == o.properties.end() || !it->is_array() || it->empty()) out.push_back(id);
    }
    return out;
}

std::string render_report(const IncidentDraft& d) {
    std::ostringstream md;
    const auto* root = d.graph.find(d.root);
    md << "# " << (root ? root->name : std::string("Incident")) << "\n\n";
    md << "- Name tag: " << d.name_tag << "\n";
    md << "- Maturity: " << d.maturity << (d.low_maturity ? " (below threshold, drafted by override)" : "")
       << "\n";
    std::vector<std::string> topics;
    for (auto t : d.topics) topics.emplace_back(to_string(t));
    md << "- Training topics: " << (topics.empty() ? std::string("none") : join(topics)) << "\n";
    md << "- Sources: " << (d.provenance.empty() ? std::string("none") : join(d.provenance)) << "\n\n";

    md << "## Entities\n\n| Kind | Name | Id |\n|---|---|---|\n";
    std::vector<const ceso::CesoObject*> objs;
    for (const auto& [_, o] : d.graph.objects()) objs.push_back(&o);
    std::sort(objs.begin(), objs.end(), [](const auto* a, const auto* b) {
        const auto ka = ceso::to_string(a->kind);
        const auto kb = ceso::to_string(b->kind);
        if (ka != kb) return ka < kb;
        if (a->name != b->name) return a->name < b->name;
        return a->id < b->id;
    });
    for (const auto* o : objs) {
        md << "| " << ceso::to_string(o->kind) << " | " << o->name << " | `" << o->id << "` |\n";
    }

    md << "\n## Tags\n\n";
    if (d.tags.empty()) {
        md << "No tags.\n";
    } else {
        md << "| Category | Values |\n|---|---|\n";
        for (auto c : kAllCategories) {
            const auto values = d.tags.values(c);
            if (!values.empty()) md << "| " << to_string(c) << " | " << join(values) << " |\n";
        }
    }

    md << "\n## Relationships\n\n";
    std::vector<std::string> lines;
    for (const auto& [_, r] : d.graph.relationships()) {
        const auto* s = d.graph.find(r.source);
        const auto* t = d.graph.find(r.target);
        lines.push_back("- " + (s ? s->name : r.source) + " *" + std::string(ceso::to_string(r.type)) + "* " +
                        (t ? t->name : r.target) + (r.nonstandard ? " (nonstandard)" : ""));
    }
    std::sort(lines.begin(), lines.end());
    if (lines.empty()) md << "No relationships.\n";
    for (const auto& l : lines) md << l << "\n";

    md << "\n## Injects\n\n";
    if (d.injects.empty()) {
        md << "No injects: the incident has no attack patterns to respond to.\n";
    }
    for (std::size_t i = 0; i < d.injects.size(); ++i) {
        const auto& inj = d.injects[i];
        md << "### " << i + 1 << ". " << inj.title << "\n\n";
        md << "- Timing: T+" << inj.timing_offset << " min\n";
        md << "- Difficulty: " << inj.difficulty << "/5\n";
        md << "- Carriers: " << join(names_of(d.graph, inj.carriers)) << "\n\n";
        md << inj.description << "\n\n";
    }
    md << "## Kill chain\n\n";
    bool any = false;
    for (const auto* ap : d.graph.of_kind(ObjectKind::attack_pattern)) {
        const auto phases = ceso::kill_chain_labels(*ap);
        md << "- " << ap->name << ": " << (phases.empty() ? std::string("unmapped") : join(phases)) << "\n";
        any = true;
    }
    if (!any) md << "No attack patterns.\n";
    return md.str();
}

void sync_inject(IncidentDraft& d, std::size_t index, std::optional<int> difficulty,
                 std::optional<int> timing_offset, std::optional<std::string> title) {
    if (index >= d.injects.size()) {
        throw Error(Errc::not_found, "inject index " + std::to_string(index) + " out of range");
    }
    auto& inj = d.injects[index];
    if (difficulty && (*difficulty < 1 || *difficulty > 5)) {
        throw Error(Errc::invalid_property, "difficulty must be an integer from 1 to 5");
    }
    if (timing_offset && *timing_offset < 0) {
        throw Error(Errc::invalid_property, "timing offset must be non-negative");
    }
    if (title && title->empty()) throw Error(Errc::invalid_property, "title must be non-empty");
    auto* coa = d.graph.find_mutable(inj.course_of_action);
    if (coa == nullptr) throw Error(Errc::invariant_violation, "inject course-of-action missing");
    if (difficulty) {
        inj.difficulty = *difficulty;
        coa->extensions.difficulty = *difficulty;
    }
    if (timing_offset) {
        inj.timing_offset = *timing_offset;
        coa->properties["x_ceso_timing_offset"] = *timing_offset;
    }
    if (title) {
        inj.title = *title;
        coa->name = *title;
    }
}

}  // namespace cesoforge::incgen
