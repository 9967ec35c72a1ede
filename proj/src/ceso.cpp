#include "cesoforge/ceso.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <set>

#include "cesoforge/errors.hpp"
#include "cesoforge/hashing.hpp"

namespace cesoforge::ceso {

namespace {

constexpr std::array<std::pair<ObjectKind, std::string_view>, 18> kKindNames{{
    {ObjectKind::grouping, "grouping"},
    {ObjectKind::campaign, "campaign"},
    {ObjectKind::intrusion_set, "intrusion-set"},
    {ObjectKind::note, "note"},
    {ObjectKind::report, "report"},
    {ObjectKind::course_of_action, "course-of-action"},
    {ObjectKind::attack_pattern, "attack-pattern"},
    {ObjectKind::malware, "malware"},
    {ObjectKind::tool, "tool"},
    {ObjectKind::vulnerability, "vulnerability"},
    {ObjectKind::threat_actor, "threat-actor"},
    {ObjectKind::identity, "identity"},
    {ObjectKind::location, "location"},
    {ObjectKind::indicator, "indicator"},
    {ObjectKind::infrastructure, "infrastructure"},
    {ObjectKind::observed_data, "observed-data"},
    {ObjectKind::malware_analysis, "malware-analysis"},
    {ObjectKind::relationship, "relationship"},
}};

struct RelName {
    RelType type;
    std::string_view api;
    std::string_view wire;
};

constexpr std::array<RelName, 9> kRelNames{{
    {RelType::related_to, "related_to", "related-to"},
    {RelType::targets, "targets", "targets"},
    {RelType::uses, "uses", "uses"},
    {RelType::attributed_to, "attributed_to", "attributed-to"},
    {RelType::located_at, "located_at", "located-at"},
    {RelType::delivers, "delivers", "delivers"},
    {RelType::indicates, "indicates", "indicates"},
    {RelType::exploits, "exploits", "exploits"},
    {RelType::mitigates, "mitigates", "mitigates"},
}};

using K = ObjectKind;
using R = RelType;

constexpr std::array<Triple, 18> kLegalTriples{{
    {K::campaign, K::grouping, R::related_to},
    {K::note, K::grouping, R::related_to},
    {K::report, K::grouping, R::related_to},
    {K::intrusion_set, K::campaign, R::related_to},
    {K::course_of_action, K::grouping, R::related_to},
    {K::intrusion_set, K::tool, R::targets},
    {K::intrusion_set, K::vulnerability, R::targets},
    {K::intrusion_set, K::attack_pattern, R::uses},
    {K::identity, K::infrastructure, R::uses},
    {K::attack_pattern, K::threat_actor, R::attributed_to},
    {K::threat_actor, K::identity, R::attributed_to},
    {K::identity, K::location, R::located_at},
    {K::attack_pattern, K::malware, R::delivers},
    {K::attack_pattern, K::indicator, R::indicates},
    {K::indicator, K::malware, R::indicates},
    {K::attack_pattern, K::vulnerability, R::exploits},
    {K::course_of_action, K::attack_pattern, R::mitigates},
    {K::course_of_action, K::vulnerability, R::mitigates},
}};

// Keys owned by the envelope; callers cannot smuggle them in as properties.
const std::set<std::string, std::less<>> kReservedKeys{
    "type", "spec_version", "id", "created", "modified", "name",
    "extensions", "relationship_type", "source_ref", "target_ref",
};

std::string hex_uuid(std::uint64_t hi, std::uint64_t lo) {
    // Version 4 / RFC 4122 variant bits.
    hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
    lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx",
                  static_cast<unsigned>(hi >> 32), static_cast<unsigned>((hi >> 16) & 0xFFFF),
                  static_cast<unsigned>(hi & 0xFFFF), static_cast<unsigned>(lo >> 48),
                  static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFULL));
    return buf;
}

[[noreturn]] void invalid(const std::string& id, const std::string& reason) {
    throw Error(Errc::invalid_property, id.empty() ? reason : id + ": " + reason);
}

bool is_string_array(const Json& v) {
    return v.is_array() &&
           std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); });
}

void check_typed_properties(const CesoObject& o) {
    const auto& p = o.properties;
    if (!p.is_object()) invalid(o.id, "properties must be an object");
    for (const auto& [key, _] : p.items()) {
        if (kReservedKeys.contains(key)) invalid(o.id, "reserved property '" + key + "'");
    }
    for (const char* key : {"sectors", "malware_types", "aliases", "threat_actor_types",
                            "tool_types", "x_ceso_assets"}) {
        if (p.contains(key) && !is_string_array(p[key])) {
            invalid(o.id, std::string(key) + " must be a list of strings");
        }
    }
    if (p.contains("is_family") && !p["is_family"].is_boolean()) {
        invalid(o.id, "is_family must be boolean");
    }
    if (p.contains("x_ceso_timing_offset")) {
        const auto& t = p["x_ceso_timing_offset"];
        if (!t.is_number_integer() || t.get<long long>() < 0) {
            invalid(o.id, "x_ceso_timing_offset must be a non-negative integer");
        }
    }
    if (p.contains("kill_chain_phases")) {
        const auto& phases = p["kill_chain_phases"];
        if (!phases.is_array()) invalid(o.id, "kill_chain_phases must be a list");
        for (const auto& ph : phases) {
            if (!ph.is_object() || !ph.contains("kill_chain_name") ||
                !ph.contains("phase_name") || !ph["kill_chain_name"].is_string() ||
                !ph["phase_name"].is_string()) {
                invalid(o.id, "malformed kill_chain_phases entry");
            }
        }
    }
}

void check_extensions(const CesoObject& o) {
    const auto& ext = o.extensions;
    if (ext.difficulty) {
        if (o.kind != ObjectKind::course_of_action) {
            invalid(o.id, "difficulty extension only applies to course-of-action");
        }
        if (*ext.difficulty < 1 || *ext.difficulty > 5) {
            invalid(o.id, "difficulty must be an integer from 1 to 5");
        }
    }
    if (ext.recipient_group && o.kind != ObjectKind::identity) {
        invalid(o.id, "recipient_group extension only applies to identity");
    }
    if (ext.scenario && o.kind != ObjectKind::grouping) {
        invalid(o.id, "scenario extension only applies to grouping");
    }
    if (o.kind == ObjectKind::grouping && (!ext.scenario || ext.scenario->empty())) {
        throw Error(Errc::missing_mandatory_extension,
                    (o.id.empty() ? std::string("grouping") : o.id) +
                        ": grouping requires a non-empty scenario extension");
    }
}

}  // namespace

std::string_view to_string(ObjectKind kind) noexcept {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<ObjectKind> parse_kind(std::string_view stix_type) noexcept {
    for (const auto& [k, name] : kKindNames) {
        if (name == stix_type) return k;
    }
    return std::nullopt;
}

std::string_view to_string(RelType type) noexcept {
    for (const auto& r : kRelNames) {
        if (r.type == type) return r.api;
    }
    return "unknown";
}

std::string_view wire_name(RelType type) noexcept {
    for (const auto& r : kRelNames) {
        if (r.type == type) return r.wire;
    }
    return "unknown";
}

std::optional<RelType> parse_rel_type(std::string_view text) noexcept {
    for (const auto& r : kRelNames) {
        if (r.api == text || r.wire == text) return r.type;
    }
    return std::nullopt;
}

std::span<const Triple> legal_triples() noexcept { return kLegalTriples; }

bool is_legal(ObjectKind source, ObjectKind target, RelType type) noexcept {
    return std::find(kLegalTriples.begin(), kLegalTriples.end(), Triple{source, target, type}) !=
           kLegalTriples.end();
}

std::string CesoObject::str(std::string_view key) const {
    auto it = properties.find(key);
    if (it == properties.end() || !it->is_string()) return {};
    return it->get<std::string>();
}

// ---------------------------------------------------------------------------

IdFactory::IdFactory() : rng_(std::random_device{}()) {
    // Mix a second draw in; random_device yields 32 bits per call.
    rng_.seed((static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ rng_());
}

IdFactory::IdFactory(std::uint64_t seed) : rng_(seed), seeded_(true) {}

std::string IdFactory::uuid() {
    std::lock_guard lock(mutex_);
    const auto hi = rng_();
    const auto lo = rng_();
    return hex_uuid(hi, lo);
}

std::string IdFactory::next(std::string_view prefix) {
    return std::string(prefix) + "--" + uuid();
}

Timestamp IdFactory::now() {
    if (seeded_) {
        // Frozen clock so seeded runs are byte-reproducible.
        return start_of_day(Date{std::chrono::year{2022}, std::chrono::March, std::chrono::day{31}});
    }
    return std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());
}

bool is_valid_id(std::string_view id) noexcept {
    static const std::regex re(
        "^[a-z-]+--[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$");
    return std::regex_match(id.begin(), id.end(), re);
}

bool id_has_kind(std::string_view id, std::string_view stix_type) noexcept {
    return id.size() > stix_type.size() + 2 && id.substr(0, stix_type.size()) == stix_type &&
           id.substr(stix_type.size(), 2) == "--";
}

// ---------------------------------------------------------------------------

const CesoObject* CesoGraph::find(std::string_view id) const {
    auto it = objects_.find(id);
    return it == objects_.end() ? nullptr : &it->second;
}

CesoObject* CesoGraph::find_mutable(std::string_view id) {
    auto it = objects_.find(id);
    return it == objects_.end() ? nullptr : &it->second;
}

bool CesoGraph::contains(std::string_view id) const {
    return objects_.contains(id) || opaque_.contains(id);
}

std::optional<ObjectKind> CesoGraph::kind_of(std::string_view id) const {
    if (const auto* o = find(id)) return o->kind;
    return std::nullopt;
}

std::vector<const CesoObject*> CesoGraph::of_kind(ObjectKind kind) const {
    std::vector<const CesoObject*> out;
    for (const auto& id : order_) {
        const auto* o = find(id);
        if (o != nullptr && o->kind == kind) out.push_back(o);
    }
    return out;
}

std::vector<const Relationship*> CesoGraph::edges_from(std::string_view id) const {
    std::vector<const Relationship*> out;
    for (const auto& [_, r] : relationships_) {
        if (r.source == id) out.push_back(&r);
    }
    return out;
}

std::vector<const Relationship*> CesoGraph::edges_to(std::string_view id) const {
    std::vector<const Relationship*> out;
    for (const auto& [_, r] : relationships_) {
        if (r.target == id) out.push_back(&r);
    }
    return out;
}

bool CesoGraph::has_edge(std::string_view source, std::string_view target, RelType type) const {
    return std::any_of(relationships_.begin(), relationships_.end(), [&](const auto& kv) {
        const auto& r = kv.second;
        return r.source == source && r.target == target && r.type == type;
    });
}

void CesoGraph::insert(CesoObject object) {
    if (contains(object.id) || relationships_.contains(object.id)) {
        throw Error(Errc::invariant_violation, object.id + ": duplicate id");
    }
    order_.push_back(object.id);
    auto id = object.id;
    objects_.emplace(std::move(id), std::move(object));
}

void CesoGraph::insert_opaque(Json object) {
    auto id = object.at("id").get<std::string>();
    if (contains(id) || relationships_.contains(id)) {
        throw Error(Errc::invariant_violation, id + ": duplicate id");
    }
    opaque_.emplace(std::move(id), std::move(object));
}

const Relationship& CesoGraph::link(std::string_view source, std::string_view target,
                                    RelType type, IdFactory& ids, LinkMode mode) {
    Relationship rel;
    rel.id = ids.next(ObjectKind::relationship);
    rel.source = std::string(source);
    rel.target = std::string(target);
    rel.type = type;
    rel.created = rel.modified = ids.now();
    const auto sk = kind_of(source);
    const auto tk = kind_of(target);
    if (!contains(source) || !contains(target)) {
        throw Error(Errc::unknown_endpoint,
                    "relationship endpoint not in graph: " +
                        std::string(contains(source) ? target : source));
    }
    const bool legal = sk && tk && is_legal(*sk, *tk, type);
    if (!legal) {
        if (mode == LinkMode::strict) {
            throw Error(Errc::illegal_triple,
                        std::string(sk ? to_string(*sk) : "opaque") + " -" +
                            std::string(to_string(type)) + "-> " +
                            std::string(tk ? to_string(*tk) : "opaque") +
                            " is not in the relationship matrix");
        }
        rel.nonstandard = true;
    }
    auto id = rel.id;
    auto [it, _] = relationships_.emplace(std::move(id), std::move(rel));
    return it->second;
}

void CesoGraph::insert_relationship(Relationship rel) {
    if (contains(rel.id) || relationships_.contains(rel.id)) {
        throw Error(Errc::invariant_violation, rel.id + ": duplicate id");
    }
    if (!contains(rel.source) || !contains(rel.target)) {
        throw Error(Errc::unknown_endpoint, rel.id + ": endpoint does not resolve");
    }
    const auto sk = kind_of(rel.source);
    const auto tk = kind_of(rel.target);
    if (!rel.nonstandard && !(sk && tk && is_legal(*sk, *tk, rel.type))) {
        throw Error(Errc::illegal_triple, rel.id + ": triple not in the relationship matrix");
    }
    auto id = rel.id;
    relationships_.emplace(std::move(id), std::move(rel));
}

void CesoGraph::erase(std::string_view id) {
    std::erase_if(relationships_,
                  [&](const auto& kv) { return kv.second.source == id || kv.second.target == id; });
    if (auto it = objects_.find(id); it != objects_.end()) objects_.erase(it);
    if (auto it = opaque_.find(id); it != opaque_.end()) opaque_.erase(it);
    std::erase(order_, std::string(id));
}

void CesoGraph::erase_relationship(std::string_view id) {
    if (auto it = relationships_.find(id); it != relationships_.end()) relationships_.erase(it);
}

// ---------------------------------------------------------------------------

CesoObject new_object(IdFactory& ids, ObjectKind kind, std::string name, const Json& properties) {
    if (kind == ObjectKind::relationship) {
        throw Error(Errc::invalid_property, "relationships are created with add_relationship");
    }
    if (name.empty()) throw Error(Errc::invalid_property, "object name must be non-empty");
    if (!properties.is_object()) throw Error(Errc::invalid_property, "properties must be a map");

    CesoObject o;
    o.kind = kind;
    o.name = std::move(name);
    for (const auto& [key, value] : properties.items()) {
        if (key == "description") {
            if (!value.is_string()) invalid({}, "description must be text");
            o.description = value.get<std::string>();
        } else if (key == "scenario") {
            if (!value.is_string()) invalid({}, "scenario must be text");
            o.extensions.scenario = value.get<std::string>();
        } else if (key == "recipient_group") {
            if (!value.is_string()) invalid({}, "recipient_group must be text");
            o.extensions.recipient_group = value.get<std::string>();
        } else if (key == "difficulty") {
            if (!value.is_number_integer()) invalid({}, "difficulty must be an integer");
            const auto d = value.get<long long>();
            if (d < 1 || d > 5) invalid({}, "difficulty must be an integer from 1 to 5");
            o.extensions.difficulty = static_cast<int>(d);
        } else {
            o.properties[key] = value;
        }
    }
    check_extensions(o);
    check_typed_properties(o);
    o.id = ids.next(kind);
    o.created = o.modified = ids.now();
    return o;
}

CesoGraph add_relationship(const CesoGraph& graph, std::string_view source,
                           std::string_view target, RelType type, IdFactory& ids, LinkMode mode) {
    CesoGraph out = graph;
    out.link(source, target, type, ids, mode);
    return out;
}

void validate_object(const CesoObject& o) {
    if (!is_valid_id(o.id) || !id_has_kind(o.id, to_string(o.kind))) {
        throw Error(Errc::invariant_violation, o.id + ": id does not match kind " +
                                                   std::string(to_string(o.kind)));
    }
    if (o.created > o.modified) {
        throw Error(Errc::invariant_violation, o.id + ": created is after modified");
    }
    check_extensions(o);
    check_typed_properties(o);
}

std::vector<Violation> check(const CesoGraph& graph) {
    std::vector<Violation> out;
    for (const auto& [id, o] : graph.objects()) {
        try {
            validate_object(o);
        } catch (const Error& e) {
            out.push_back({id, e.what()});
        }
    }
    for (const auto& [id, r] : graph.relationships()) {
        if (!is_valid_id(id) || !id_has_kind(id, "relationship")) {
            out.push_back({id, "malformed relationship id"});
        }
        if (!graph.contains(r.source) || !graph.contains(r.target)) {
            out.push_back({id, "dangling relationship endpoint"});
            continue;
        }
        const auto sk = graph.kind_of(r.source);
        const auto tk = graph.kind_of(r.target);
        if (!r.nonstandard && !(sk && tk && is_legal(*sk, *tk, r.type))) {
            out.push_back({id, "relationship triple not in matrix and not flagged nonstandard"});
        }
        if (r.created > r.modified) out.push_back({id, "created is after modified"});
    }
    return out;
}

void validate(const CesoGraph& graph) {
    const auto violations = check(graph);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw Error(Errc::invariant_violation, v.object_id + ": " + v.reason);
    }
}

// ---------------------------------------------------------------------------

Json to_stix(const CesoObject& o) {
    Json j = o.properties.is_object() ? o.properties : Json::object();
    j["type"] = to_string(o.kind);
    j["spec_version"] = "2.1";
    j["id"] = o.id;
    j["created"] = format_timestamp(o.created);
    j["modified"] = format_timestamp(o.modified);
    if (o.kind == ObjectKind::note) {
        if (!o.name.empty()) j["abstract"] = o.name;
        j["content"] = o.description;
    } else {
        if (!o.name.empty()) j["name"] = o.name;
        if (!o.description.empty()) j["description"] = o.description;
    }
    if (!o.extensions.empty()) {
        Json ext{{"extension_type", "property-extension"}};
        if (o.extensions.difficulty) ext["difficulty"] = *o.extensions.difficulty;
        if (o.extensions.scenario) ext["scenario"] = *o.extensions.scenario;
        if (o.extensions.recipient_group) ext["recipient_group"] = *o.extensions.recipient_group;
        j["extensions"][std::string(kExtensionKey)] = std::move(ext);
    }
    return j;
}

Json to_stix(const Relationship& r) {
    Json j{
        {"type", "relationship"},
        {"spec_version", "2.1"},
        {"id", r.id},
        {"created", format_timestamp(r.created)},
        {"modified", format_timestamp(r.modified)},
        {"relationship_type", wire_name(r.type)},
        {"source_ref", r.source},
        {"target_ref", r.target},
    };
    if (r.nonstandard) j["x_ceso_nonstandard"] = true;
    return j;
}

namespace {

Timestamp required_timestamp(const Json& j, const char* key, const std::string& id) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw Error(Errc::malformed_bundle, id + ": missing " + key);
    }
    auto ts = parse_timestamp(j[key].get<std::string>());
    if (!ts) throw Error(Errc::malformed_bundle, id + ": bad timestamp in " + key);
    return *ts;
}

std::string take_string(Json& j, const char* key) {
    std::string out;
    if (auto it = j.find(key); it != j.end()) {
        if (it->is_string()) out = it->get<std::string>();
        j.erase(it);
    }
    return out;
}

}  // namespace

CesoObject object_from_stix(const Json& json) {
    if (!json.is_object() || !json.contains("type") || !json["type"].is_string() ||
        !json.contains("id") || !json["id"].is_string()) {
        throw Error(Errc::malformed_bundle, "object lacks type or id");
    }
    const auto type = json["type"].get<std::string>();
    const auto kind = parse_kind(type);
    if (!kind || *kind == ObjectKind::relationship) {
        throw Error(Errc::malformed_bundle, "not a CESO domain object type: " + type);
    }
    CesoObject o;
    o.kind = *kind;
    o.id = json["id"].get<std::string>();
    o.created = required_timestamp(json, "created", o.id);
    o.modified = required_timestamp(json, "modified", o.id);

    Json props = json;
    for (const char* key : {"type", "spec_version", "id", "created", "modified"}) props.erase(key);
    if (o.kind == ObjectKind::note) {
        o.name = take_string(props, "abstract");
        o.description = take_string(props, "content");
    } else {
        o.name = take_string(props, "name");
        o.description = take_string(props, "description");
    }
    if (auto ext_it = props.find("extensions"); ext_it != props.end() && ext_it->is_object()) {
        if (auto c = ext_it->find(std::string(kExtensionKey)); c != ext_it->end()) {
            const Json& ext = *c;
            if (!ext.is_object()) throw Error(Errc::malformed_bundle, o.id + ": bad extension");
            if (ext.contains("difficulty")) {
                if (!ext["difficulty"].is_number_integer()) {
                    throw Error(Errc::invariant_violation, o.id + ": difficulty must be integer");
                }
                o.extensions.difficulty = ext["difficulty"].get<int>();
            }
            if (ext.contains("scenario") && ext["scenario"].is_string()) {
                o.extensions.scenario = ext["scenario"].get<std::string>();
            }
            if (ext.contains("recipient_group") && ext["recipient_group"].is_string()) {
                o.extensions.recipient_group = ext["recipient_group"].get<std::string>();
            }
            ext_it->erase(c);
        }
        if (ext_it->empty()) props.erase(ext_it);
    }
    o.properties = std::move(props);
    return o;
}

Json bundle_json(const CesoGraph& graph) {
    // All entries (domain, relationship, opaque) sorted by id.
    std::map<std::string, Json> sorted;
    for (const auto& [id, o] : graph.objects()) sorted.emplace(id, to_stix(o));
    for (const auto& [id, r] : graph.relationships()) sorted.emplace(id, to_stix(r));
    for (const auto& [id, j] : graph.opaque()) sorted.emplace(id, j);

    Json objects = Json::array();
    for (auto& [_, j] : sorted) objects.push_back(std::move(j));

    // Bundle id derives from content so identical graphs yield identical bundles.
    const auto body = objects.dump();
    const auto hi = fnv1a64(body);
    const auto lo = fnv1a64(body, 0x9E3779B97F4A7C15ULL);
    return Json{{"type", "bundle"}, {"id", "bundle--" + hex_uuid(hi, lo)}, {"objects", objects}};
}

std::string serialize_bundle(const CesoGraph& graph) { return bundle_json(graph).dump(2); }

CesoGraph graph_from_json(const Json& bundle, ParseMode mode) {
    if (!bundle.is_object() || bundle.value("type", "") != "bundle" || !bundle.contains("objects") ||
        !bundle["objects"].is_array()) {
        throw Error(Errc::malformed_bundle, "not a STIX bundle");
    }
    CesoGraph graph;
    std::vector<const Json*> rels;
    for (const auto& j : bundle["objects"]) {
        if (!j.is_object() || !j.contains("type") || !j["type"].is_string() || !j.contains("id") ||
            !j["id"].is_string()) {
            throw Error(Errc::malformed_bundle, "bundle entry lacks type or id");
        }
        const auto type = j["type"].get<std::string>();
        if (type == "relationship") {
            const auto rt = j.contains("relationship_type") && j["relationship_type"].is_string()
                                ? parse_rel_type(j["relationship_type"].get<std::string>())
                                : std::nullopt;
            if (rt) {
                rels.push_back(&j);
            } else {
                graph.insert_opaque(j);
            }
            continue;
        }
        if (!parse_kind(type)) {
            graph.insert_opaque(j);
            continue;
        }
        graph.insert(object_from_stix(j));
    }
    for (const Json* jp : rels) {
        const Json& j = *jp;
        Relationship r;
        r.id = j["id"].get<std::string>();
        r.type = *parse_rel_type(j["relationship_type"].get<std::string>());
        if (!j.contains("source_ref") || !j["source_ref"].is_string() || !j.contains("target_ref") ||
            !j["target_ref"].is_string()) {
            throw Error(Errc::malformed_bundle, r.id + ": relationship lacks source/target");
        }
        r.source = j["source_ref"].get<std::string>();
        r.target = j["target_ref"].get<std::string>();
        r.created = required_timestamp(j, "created", r.id);
        r.modified = required_timestamp(j, "modified", r.id);
        r.nonstandard = j.value("x_ceso_nonstandard", false);
        if (!graph.contains(r.source) || !graph.contains(r.target)) {
            throw Error(Errc::invariant_violation, r.id + ": dangling relationship endpoint");
        }
        const auto sk = graph.kind_of(r.source);
        const auto tk = graph.kind_of(r.target);
        if (!r.nonstandard && !(sk && tk && is_legal(*sk, *tk, r.type))) {
            if (mode == ParseMode::strict) {
                throw Error(Errc::invariant_violation,
                            r.id + ": triple not in the relationship matrix");
            }
            r.nonstandard = true;
        }
        try {
            graph.insert_relationship(std::move(r));
        } catch (const Error& e) {
            throw Error(Errc::invariant_violation, e.what());
        }
    }
    validate(graph);
    return graph;
}

CesoGraph parse_bundle(std::string_view text, ParseMode mode) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const Json::exception& e) {
        throw Error(Errc::malformed_bundle, std::string("invalid JSON: ") + e.what());
    }
    return graph_from_json(j, mode);
}

// ---------------------------------------------------------------------------

bool is_kill_chain_phase(std::string_view phase) noexcept {
    return std::find(kKillChainPhases.begin(), kKillChainPhases.end(), phase) !=
           kKillChainPhases.end();
}

std::vector<std::string> kill_chain_labels(const CesoObject& object) {
    std::vector<std::string> out;
    auto it = object.properties.find("kill_chain_phases");
    if (it == object.properties.end() || !it->is_array()) return out;
    for (const auto& ph : *it) {
        if (!ph.is_object() || ph.value("kill_chain_name", "") != kKillChainName) continue;
        auto name = ph.value("phase_name", "");
        if (!name.empty() && std::find(out.begin(), out.end(), name) == out.end()) {
            out.push_back(std::move(name));
        }
    }
    return out;
}

void add_kill_chain_label(CesoObject& object, std::string_view phase) {
    const auto existing = kill_chain_labels(object);
    if (std::find(existing.begin(), existing.end(), phase) != existing.end()) return;
    auto& phases = object.properties["kill_chain_phases"];
    if (!phases.is_array()) phases = Json::array();
    phases.push_back({{"kill_chain_name", kKillChainName}, {"phase_name", phase}});
}

}  // namespace cesoforge::ceso
