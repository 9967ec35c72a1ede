#pragma once

// CESO ontology: STIX 2.1 object kinds, exercise extensions, the legal
// relationship matrix, and bundle (de)serialization.

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cesoforge/chrono.hpp"

namespace cesoforge::ceso {

using Json = nlohmann::json;

enum class ObjectKind {
    grouping,
    campaign,
    intrusion_set,
    note,
    report,
    course_of_action,
    attack_pattern,
    malware,
    tool,
    vulnerability,
    threat_actor,
    identity,
    location,
    indicator,
    infrastructure,
    observed_data,
    malware_analysis,
    relationship,
};

inline constexpr std::array kAllKinds{
    ObjectKind::grouping,       ObjectKind::campaign,         ObjectKind::intrusion_set,
    ObjectKind::note,           ObjectKind::report,           ObjectKind::course_of_action,
    ObjectKind::attack_pattern, ObjectKind::malware,          ObjectKind::tool,
    ObjectKind::vulnerability,  ObjectKind::threat_actor,     ObjectKind::identity,
    ObjectKind::location,       ObjectKind::indicator,        ObjectKind::infrastructure,
    ObjectKind::observed_data,  ObjectKind::malware_analysis, ObjectKind::relationship,
};

/// Canonical STIX type name ("intrusion-set", "course-of-action", ...).
std::string_view to_string(ObjectKind kind) noexcept;
std::optional<ObjectKind> parse_kind(std::string_view stix_type) noexcept;

enum class RelType {
    related_to,
    targets,
    uses,
    attributed_to,
    located_at,
    delivers,
    indicates,
    exploits,
    mitigates,
};

/// Underscore form used by the API ("related_to").
std::string_view to_string(RelType type) noexcept;
/// Hyphenated STIX vocabulary form used on the wire ("related-to").
std::string_view wire_name(RelType type) noexcept;
/// Accepts either form.
std::optional<RelType> parse_rel_type(std::string_view text) noexcept;

struct Triple {
    ObjectKind source;
    ObjectKind target;
    RelType type;

    bool operator==(const Triple&) const = default;
};

/// The relationship matrix between key exercise objects.
std::span<const Triple> legal_triples() noexcept;
bool is_legal(ObjectKind source, ObjectKind target, RelType type) noexcept;

struct CesoExtensions {
    std::optional<int> difficulty;              // course-of-action only, 1..5
    std::optional<std::string> scenario;        // grouping only, mandatory there
    std::optional<std::string> recipient_group; // identity only

    bool empty() const noexcept { return !difficulty && !scenario && !recipient_group; }
    bool operator==(const CesoExtensions&) const = default;
};

inline constexpr std::string_view kExtensionKey = "extension-definition--ceso";

struct CesoObject {
    std::string id;
    ObjectKind kind = ObjectKind::grouping;
    std::string name;
    std::string description;
    Timestamp created{};
    Timestamp modified{};
    Json properties = Json::object();
    CesoExtensions extensions;

    /// String property or empty.
    std::string str(std::string_view key) const;

    bool operator==(const CesoObject&) const = default;
};

struct Relationship {
    std::string id;
    std::string source;
    std::string target;
    RelType type = RelType::related_to;
    bool nonstandard = false;
    Timestamp created{};
    Timestamp modified{};

    bool operator==(const Relationship&) const = default;
};

/// Mints `<kind>--<uuid4>` identifiers and timestamps. A seeded factory
/// yields a reproducible id stream and a frozen clock. Thread-safe.
class IdFactory {
public:
    IdFactory();
    explicit IdFactory(std::uint64_t seed);

    std::string uuid();
    std::string next(ObjectKind kind) { return next(to_string(kind)); }
    std::string next(std::string_view prefix);
    Timestamp now();
    bool seeded() const noexcept { return seeded_; }

private:
    std::mutex mutex_;
    std::mt19937_64 rng_;
    bool seeded_ = false;
};

bool is_valid_id(std::string_view id) noexcept;
bool id_has_kind(std::string_view id, std::string_view stix_type) noexcept;

enum class LinkMode { strict, allow_nonstandard };

/// Id-keyed object collection plus relationship edges. Value type; copying is
/// the way to derive a modified graph from a shared one.
class CesoGraph {
public:
    using ObjectMap = std::map<std::string, CesoObject, std::less<>>;
    using RelationshipMap = std::map<std::string, Relationship, std::less<>>;
    using OpaqueMap = std::map<std::string, Json, std::less<>>;

    const ObjectMap& objects() const noexcept { return objects_; }
    const RelationshipMap& relationships() const noexcept { return relationships_; }
    const OpaqueMap& opaque() const noexcept { return opaque_; }
    /// Object ids in insertion order (not part of equality).
    const std::vector<std::string>& order() const noexcept { return order_; }

    const CesoObject* find(std::string_view id) const;
    CesoObject* find_mutable(std::string_view id);
    bool contains(std::string_view id) const;
    std::optional<ObjectKind> kind_of(std::string_view id) const;

    std::vector<const CesoObject*> of_kind(ObjectKind kind) const;
    std::vector<const Relationship*> edges_from(std::string_view id) const;
    std::vector<const Relationship*> edges_to(std::string_view id) const;
    bool has_edge(std::string_view source, std::string_view target, RelType type) const;

    bool empty() const noexcept { return objects_.empty() && relationships_.empty() && opaque_.empty(); }

    void insert(CesoObject object);
    void insert_opaque(Json object);
    /// Validates endpoints and the triple; `allow_nonstandard` marks
    /// off-matrix edges instead of rejecting them.
    const Relationship& link(std::string_view source, std::string_view target, RelType type,
                             IdFactory& ids, LinkMode mode = LinkMode::strict);
    void insert_relationship(Relationship rel);
    /// Removes the object and every incident relationship.
    void erase(std::string_view id);
    void erase_relationship(std::string_view id);

    friend bool operator==(const CesoGraph& a, const CesoGraph& b) {
        return a.objects_ == b.objects_ && a.relationships_ == b.relationships_ &&
               a.opaque_ == b.opaque_;
    }

private:
    ObjectMap objects_;
    RelationshipMap relationships_;
    OpaqueMap opaque_;
    std::vector<std::string> order_;
};

/// Builds a validated object. Extension attributes (`scenario`, `difficulty`,
/// `recipient_group`) and `description` may be passed through `properties`.
CesoObject new_object(IdFactory& ids, ObjectKind kind, std::string name,
                      const Json& properties = Json::object());

CesoGraph add_relationship(const CesoGraph& graph, std::string_view source,
                           std::string_view target, RelType type, IdFactory& ids,
                           LinkMode mode = LinkMode::strict);

struct Violation {
    std::string object_id;
    std::string reason;
};

void validate_object(const CesoObject& object);
std::vector<Violation> check(const CesoGraph& graph);
/// Throws InvariantViolation naming the first offending object.
void validate(const CesoGraph& graph);

Json to_stix(const CesoObject& object);
Json to_stix(const Relationship& rel);
CesoObject object_from_stix(const Json& json);

/// `strict` expects a CESO-produced bundle; `foreign` (e.g. ATT&CK) flags
/// off-matrix relationships as nonstandard instead of rejecting them.
enum class ParseMode { strict, foreign };

Json bundle_json(const CesoGraph& graph);
std::string serialize_bundle(const CesoGraph& graph);
CesoGraph graph_from_json(const Json& bundle, ParseMode mode = ParseMode::strict);
CesoGraph parse_bundle(std::string_view text, ParseMode mode = ParseMode::strict);

/// Kill-chain phase names attached to an object under the Lockheed-Martin
/// kill chain.
inline constexpr std::string_view kKillChainName = "lockheed-martin-cyber-kill-chain";
inline constexpr std::array<std::string_view, 7> kKillChainPhases{
    "reconnaissance", "weaponization",       "delivery",           "exploitation",
    "installation",   "command-and-control", "actions-on-objectives",
};
bool is_kill_chain_phase(std::string_view phase) noexcept;
std::vector<std::string> kill_chain_labels(const CesoObject& object);
void add_kill_chain_label(CesoObject& object, std::string_view phase);

}  // namespace cesoforge::ceso
