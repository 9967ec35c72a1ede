#include "cesoforge/tagger.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "cesoforge/errors.hpp"

namespace cesoforge::tagger {

using ceso::Json;
using ceso::ObjectKind;
using ceso::RelType;

namespace {

bool word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool has_upper(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isupper(c) != 0; });
}

// Every word-bounded occurrence of `needle` in `hay`.
std::vector<std::size_t> find_bounded(std::string_view hay, std::string_view needle) {
    std::vector<std::size_t> out;
    if (needle.empty()) return out;
    std::size_t pos = hay.find(needle);
    while (pos != std::string_view::npos) {
        const auto end = pos + needle.size();
        const bool left = pos == 0 || !word_byte(static_cast<unsigned char>(hay[pos - 1])) ||
                          !word_byte(static_cast<unsigned char>(needle.front()));
        const bool right = end == hay.size() || !word_byte(static_cast<unsigned char>(hay[end])) ||
                           !word_byte(static_cast<unsigned char>(needle.back()));
        if (left && right) out.push_back(pos);
        pos = hay.find(needle, pos + 1);
    }
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::parse_failure, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json parse_json_file(const std::filesystem::path& p) {
    try {
        return Json::parse(read_file(p));
    } catch (const Json::exception& e) {
        throw Error(Errc::parse_failure, p.string() + ": " + e.what());
    }
}

}  // namespace

GazetteerSet GazetteerSet::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(Errc::parse_failure, "gazetteer directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    GazetteerSet set;
    for (const auto& f : files) {
        const auto j = parse_json_file(f);
        Gazetteer g;
        try {
            const auto name = j.at("category").get<std::string>();
            const auto cat = parse_category(name);
            if (!cat) throw Error(Errc::parse_failure, f.string() + ": unknown category " + name);
            g.category = *cat;
            g.entries = j.at("entries").get<std::vector<std::string>>();
            if (j.contains("kill_chain")) {
                for (const auto& [phrase, phases] : j["kill_chain"].items()) {
                    g.kill_chain[phrase] = phases.get<std::vector<std::string>>();
                }
            }
        } catch (const Json::exception& e) {
            throw Error(Errc::parse_failure, f.string() + ": " + e.what());
        }
        set.add(std::move(g));
    }
    return set;
}

void GazetteerSet::add(Gazetteer g) {
    const auto cat = std::string(to_string(g.category));
    for (const auto& e : g.entries) {
        if (e.empty() || has_upper(e)) {
            throw Error(Errc::parse_failure, cat + " gazetteer entry must be non-empty lowercase: '" + e + "'");
        }
    }
    for (const auto& [phrase, phases] : g.kill_chain) {
        for (const auto& p : phases) {
            if (!ceso::is_kill_chain_phase(p)) {
                throw Error(Errc::parse_failure, cat + " kill chain phase unknown: " + p);
            }
        }
    }
    std::sort(g.entries.begin(), g.entries.end());
    g.entries.erase(std::unique(g.entries.begin(), g.entries.end()), g.entries.end());
    gazetteers_.push_back(std::move(g));
}

std::vector<std::string> GazetteerSet::phases_for(std::string_view attack_type) const {
    const auto key = ascii_lower(attack_type);
    std::vector<std::string> out;
    for (const auto& g : gazetteers_) {
        if (auto it = g.kill_chain.find(key); it != g.kill_chain.end()) {
            for (const auto& p : it->second) {
                if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
            }
        }
    }
    return out;
}

std::vector<TagSpan> match_cves(std::string_view text) {
    static const std::regex cve("cve-\\d{4}-\\d{4,}", std::regex::icase);
    std::vector<TagSpan> out;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), cve); it != std::sregex_iterator(); ++it) {
        const auto start = static_cast<std::size_t>(it->position());
        const auto end = start + static_cast<std::size_t>(it->length());
        if (start > 0 && word_byte(static_cast<unsigned char>(s[start - 1]))) continue;
        if (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) continue;
        out.push_back({TagCategory::vulnerability, s.substr(start, end - start), start, end, TaggerKind::regex});
    }
    return out;
}

TagSet tag_text(std::string_view text, const GazetteerSet& gazetteers, std::string article_id) {
    const auto lower = ascii_lower(text);
    std::vector<TagSpan> spans;
    for (const auto& g : gazetteers.all()) {
        for (const auto& entry : g.entries) {
            for (auto pos : find_bounded(lower, entry)) {
                spans.push_back({g.category, std::string(text.substr(pos, entry.size())), pos,
                                 pos + entry.size(), TaggerKind::gazetteer});
            }
        }
    }
    for (auto& s : match_cves(text)) spans.push_back(std::move(s));
    return TagSet(std::move(article_id), std::move(spans));
}

std::vector<AnnotatedText> load_external_annotations(std::string_view jsonl) {
    std::vector<AnnotatedText> out;
    std::istringstream in{std::string(jsonl)};
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = "line " + std::to_string(lineno) + ": ";
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw Error(Errc::parse_failure, where + e.what());
        }
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
            throw Error(Errc::parse_failure, where + "missing text");
        }
        AnnotatedText a;
        a.text = j["text"].get<std::string>();
        a.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                      : "line-" + std::to_string(lineno);
        std::vector<TagSpan> spans;
        for (const auto& s : j.value("spans", Json::array())) {
            if (!s.is_object() || !s.contains("start") || !s.contains("end") || !s.contains("label") ||
                !s["start"].is_number_integer() || !s["end"].is_number_integer() || !s["label"].is_string()) {
                throw Error(Errc::parse_failure, where + "span needs integer start/end and a label");
            }
            const auto label = s["label"].get<std::string>();
            const auto cat = parse_category(label);
            if (!cat) throw Error(Errc::unknown_category, where + "unknown category " + label);
            const auto start = s["start"].get<long long>();
            const auto end = s["end"].get<long long>();
            if (start < 0 || end <= start || static_cast<std::size_t>(end) > a.text.size()) {
                throw Error(Errc::bad_span, where + "span [" + std::to_string(start) + ", " +
                                                std::to_string(end) + ") outside text of length " +
                                                std::to_string(a.text.size()));
            }
            const auto b = static_cast<std::size_t>(start);
            const auto e = static_cast<std::size_t>(end);
            spans.push_back({*cat, a.text.substr(b, e - b), b, e, TaggerKind::external});
        }
        a.tags = TagSet(a.id, std::move(spans));
        out.push_back(std::move(a));
    }
    return out;
}

int maturity(const TagSet& tags) {
    const bool attacker_type = tags.has(TagCategory::attacker_type);
    const bool attack_type = tags.has(TagCategory::attack_type);
    const bool malware = tags.has(TagCategory::malware_type) || tags.has(TagCategory::malware_name);
    int score = 0;
    if (attacker_type || attack_type) {
        score = 50;
        score += tags.has(TagCategory::vulnerability) ? 15 : -10;
        score += malware ? 15 : -10;
        if (attack_type) {
            score += 15;
            if (attacker_type) {
                score += 50;
                for (auto c : {TagCategory::technology, TagCategory::sector, TagCategory::assets,
                               TagCategory::attacker_origin}) {
                    if (tags.has(c)) score += 10;
                }
            }
        }
    }
    return score;
}

bool is_mature(int score, int threshold) {
    if (threshold < 0 || threshold > 185) {
        throw Error(Errc::precondition_violation, "maturity threshold must be within [0, 185]");
    }
    return score >= threshold;
}

bool is_mature(const TagSet& tags, int threshold) { return is_mature(maturity(tags), threshold); }

TopicTable load_topics(const std::filesystem::path& path) {
    const auto j = parse_json_file(path);
    if (!j.is_object()) throw Error(Errc::parse_failure, path.string() + ": expected an object");
    TopicTable table;
    for (auto topic : kAllTopics) {
        const auto key = std::string(to_string(topic));
        if (!j.contains(key)) throw Error(Errc::parse_failure, path.string() + ": missing " + key);
        try {
            auto words = j[key].get<std::vector<std::string>>();
            for (auto& w : words) w = ascii_lower(w);
            table.emplace_back(topic, std::move(words));
        } catch (const Json::exception& e) {
            throw Error(Errc::parse_failure, path.string() + ": " + e.what());
        }
    }
    return table;
}

std::vector<TrainingTopic> assign_topics(std::string_view text, const TagSet& tags,
                                         const TopicTable& table) {
    const auto lower = ascii_lower(text);
    std::vector<std::string> span_texts;
    for (const auto& s : tags.spans()) span_texts.push_back(ascii_lower(s.text));

    std::vector<std::pair<int, TrainingTopic>> scored;
    for (const auto& [topic, words] : table) {
        int hits = 0;
        for (const auto& w : std::set<std::string>(words.begin(), words.end())) {
            bool hit = !find_bounded(lower, w).empty();
            for (std::size_t i = 0; !hit && i < span_texts.size(); ++i) {
                hit = !find_bounded(span_texts[i], w).empty();
            }
            if (hit) ++hits;
        }
        if (hits > 0) scored.emplace_back(hits, topic);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return to_string(a.second) < to_string(b.second);
    });
    std::vector<TrainingTopic> out;
    for (const auto& [_, t] : scored) out.push_back(t);
    return out;
}

Resources Resources::load(const std::filesystem::path& dir) {
    return Resources{GazetteerSet::load(dir / "gazetteers"), load_topics(dir / "topics.json")};
}

ceso::CesoGraph build_fragment(const TagSet& tags, const GazetteerSet& gazetteers,
                               ceso::IdFactory& ids) {
    ceso::CesoGraph g;
    const Json provenance =
        Json::array({"article:" + (tags.article_id().empty() ? std::string("adhoc") : tags.article_id())});
    auto add = [&](ObjectKind kind, std::string name, Json props) {
        props["x_ceso_provenance"] = provenance;
        auto o = ceso::new_object(ids, kind, std::move(name), props);
        auto id = o.id;
        g.insert(std::move(o));
        return id;
    };

    const auto attacker_names = tags.values(TagCategory::attacker_name);
    const auto attacker_types = tags.values(TagCategory::attacker_type);
    const auto origins = tags.values(TagCategory::attacker_origin);
    const auto assets = tags.values(TagCategory::assets);

    std::string actor;
    if (!attacker_names.empty() || !attacker_types.empty() || !origins.empty() || !assets.empty()) {
        Json props = Json::object();
        if (!attacker_types.empty()) props["threat_actor_types"] = attacker_types;
        if (attacker_names.size() > 1) {
            props["aliases"] = std::vector<std::string>(attacker_names.begin() + 1, attacker_names.end());
        }
        if (!assets.empty()) props["x_ceso_assets"] = assets;
        const auto name = !attacker_names.empty() ? attacker_names.front()
                          : !attacker_types.empty() ? attacker_types.front()
                                                    : std::string("unknown threat actor");
        actor = add(ObjectKind::threat_actor, name, props);

        if (!attacker_names.empty() || !origins.empty()) {
            const auto identity =
                add(ObjectKind::identity, name + " (attributed identity)", {{"identity_class", "group"}});
            g.link(actor, identity, RelType::attributed_to, ids);
            for (const auto& o : origins) {
                const auto loc = add(ObjectKind::location, o, Json::object());
                g.link(identity, loc, RelType::located_at, ids);
            }
        }
    }

    std::vector<std::string> malware;
    const auto malware_types = tags.values(TagCategory::malware_type);
    auto malware_props = [&] {
        Json p{{"is_family", true}};
        if (!malware_types.empty()) p["malware_types"] = malware_types;
        return p;
    };
    for (const auto& name : tags.values(TagCategory::malware_name)) {
        malware.push_back(add(ObjectKind::malware, name, malware_props()));
    }
    if (malware.empty() && !malware_types.empty()) {
        malware.push_back(add(ObjectKind::malware, malware_types.front(), malware_props()));
    }

    std::vector<std::string> vulns;
    for (const auto& v : tags.values(TagCategory::vulnerability)) {
        std::string name = v;
        Json props = Json::object();
        if (std::regex_match(v, std::regex("cve-\\d{4}-\\d{4,}", std::regex::icase))) {
            for (auto& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            props["external_references"] = Json::array({{{"source_name", "cve"}, {"external_id", name}}});
        }
        vulns.push_back(add(ObjectKind::vulnerability, name, props));
    }

    for (const auto& technique : tags.values(TagCategory::attack_type)) {
        Json props = Json::object();
        const auto id = add(ObjectKind::attack_pattern, technique, props);
        auto* ap = g.find_mutable(id);
        for (const auto& phase : gazetteers.phases_for(technique)) ceso::add_kill_chain_label(*ap, phase);
        for (const auto& m : malware) g.link(id, m, RelType::delivers, ids);
        for (const auto& v : vulns) g.link(id, v, RelType::exploits, ids);
        if (!actor.empty()) g.link(id, actor, RelType::attributed_to, ids);
    }

    const auto sectors = tags.values(TagCategory::sector);
    if (!sectors.empty()) {
        add(ObjectKind::identity, sectors.front() + " sector",
            {{"identity_class", "class"}, {"sectors", sectors}, {"x_ceso_role", "victim"}});
    }
    for (const auto& t : tags.values(TagCategory::technology)) add(ObjectKind::tool, t, Json::object());
    return g;
}

Breadcrumb to_breadcrumb(const ArticleRecord& article, const TagSet& tags,
                         const Resources& resources, ceso::IdFactory& ids) {
    Breadcrumb b;
    b.article_id = article.id;
    b.name_tag = article.name_tag;
    b.published = article.published;
    b.tags = tags;
    b.tags.set_article_id(article.id);
    b.maturity = maturity(tags);
    b.topics = assign_topics(article.normalized_text, tags, resources.topics);
    b.fragment = build_fragment(b.tags, resources.gazetteers, ids);
    return b;
}

}  // namespace cesoforge::tagger
