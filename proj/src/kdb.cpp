#include "cesoforge/kdb.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>

#include "cesoforge/errors.hpp"
#include "cesoforge/hashing.hpp"

namespace cesoforge::kdb {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool has_value(const TagSet& tags, TagCategory c, const std::string& value) {
    const auto wanted = lower(value);
    return std::any_of(tags.spans().begin(), tags.spans().end(), [&](const TagSpan& s) {
        return s.category == c && lower(s.text) == wanted;
    });
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

bool QueryFilter::matches(const Breadcrumb& b) const {
    for (const auto& t : tags) {
        const auto wanted = lower(t);
        const bool found = std::any_of(b.tags.spans().begin(), b.tags.spans().end(),
                                       [&](const TagSpan& s) { return lower(s.text) == wanted; });
        if (!found) return false;
    }
    if (sector && !has_value(b.tags, TagCategory::sector, *sector)) return false;
    if (attack_type && !has_value(b.tags, TagCategory::attack_type, *attack_type)) return false;
    if (topic && std::find(b.topics.begin(), b.topics.end(), *topic) == b.topics.end()) {
        return false;
    }
    if (from && b.published < *from) return false;
    if (to && b.published > *to) return false;
    if (name_tag && b.name_tag != *name_tag) return false;
    if (min_maturity && b.maturity < *min_maturity) return false;
    return true;
}

json QueryFilter::to_json() const {
    json j = json::object();
    if (!tags.empty()) j["tags"] = tags;
    if (sector) j["sector"] = *sector;
    if (attack_type) j["attack_type"] = *attack_type;
    if (topic) j["topic"] = cesoforge::to_string(*topic);
    if (from) j["from"] = format_date(*from);
    if (to) j["to"] = format_date(*to);
    if (name_tag) j["name_tag"] = *name_tag;
    if (min_maturity) j["min_maturity"] = *min_maturity;
    return j;
}

QueryFilter QueryFilter::from_json(const json& j) {
    QueryFilter f;
    if (!j.is_object()) throw Error(Errc::validation_error, "filter must be an object");
    auto text = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        if (!j[key].is_string()) throw Error(Errc::validation_error, std::string(key) + " must be text");
        return j[key].get<std::string>();
    };
    auto date = [&](const char* key) -> std::optional<Date> {
        auto t = text(key);
        if (!t) return std::nullopt;
        auto d = parse_date(*t);
        if (!d) throw Error(Errc::validation_error, std::string("bad date in ") + key);
        return d;
    };
    if (j.contains("tags")) {
        if (j["tags"].is_string()) {
            f.tags.push_back(j["tags"].get<std::string>());
        } else {
            for (const auto& t : j["tags"]) f.tags.push_back(t.get<std::string>());
        }
    }
    f.sector = text("sector");
    f.attack_type = text("attack_type");
    if (auto t = text("topic")) {
        f.topic = parse_topic(*t);
        if (!f.topic) throw Error(Errc::validation_error, "unknown training topic: " + *t);
    }
    f.from = date("from");
    f.to = date("to");
    f.name_tag = text("name_tag");
    if (j.contains("min_maturity") && !j["min_maturity"].is_null()) {
        if (j["min_maturity"].is_number_integer()) {
            f.min_maturity = j["min_maturity"].get<int>();
        } else if (j["min_maturity"].is_string()) {
            try {
                f.min_maturity = std::stoi(j["min_maturity"].get<std::string>());
            } catch (const std::exception&) {
                throw Error(Errc::validation_error, "min_maturity must be an integer");
            }
        } else {
            throw Error(Errc::validation_error, "min_maturity must be an integer");
        }
    }
    return f;
}

json Stats::to_json() const {
    auto ranked = [](const Ranked& r) {
        json out = json::array();
        for (const auto& [value, count] : r) out.push_back({value, count});
        return out;
    };
    json months = json::object();
    for (const auto& [m, c] : count_by_month) months[m.str()] = c;
    return {{"matched", matched},
            {"count_by_month", months},
            {"top_attackers", ranked(top_attackers)},
            {"top_techniques", ranked(top_techniques)},
            {"top_malware", ranked(top_malware)},
            {"top_vulnerabilities", ranked(top_vulnerabilities)},
            {"topic_breakdown", ranked(topic_breakdown)}};
}

Ranked top_k(const std::map<std::string, int>& counts, std::size_t k) {
    Ranked out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

std::string article_id_for(const ArticleRecord& record) {
    const std::string key =
        record.url && !record.url->empty() ? "url:" + *record.url : "text:" + record.normalized_text;
    return "art-" + hex64(fnv1a64(key));
}

// ---------------------------------------------------------------------------

Store::Store(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(Errc::storage_failure, "cannot create data dir " + dir_.string());

    replay(kArticles, [&](const json& j) {
        auto a = article_from_json(j);
        articles_[a.id] = std::move(a);
    });
    replay(kBreadcrumbs, [&](const json& j) {
        auto b = breadcrumb_from_json(j);
        breadcrumbs_[b.article_id] = std::move(b);
    });
    replay(kIncidents, [&](const json& j) {
        auto s = incident_from_json(j);
        if (!incidents_.contains(s.id)) incident_order_.push_back(s.id);
        incidents_[s.id] = std::move(s);
    });
    replay(kProfiles, [&](const json& j) {
        auto p = profile_from_json(j);
        profiles_[p.group_id] = std::move(p);
    });
    replay(kScenarios, [&](const json& j) {
        auto s = scenario_from_json(j);
        scenarios_[s.id] = std::move(s);
    });
}

template <typename Fn>
void Store::replay(const char* file, Fn&& apply) {
    const auto path = dir_ / file;
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::storage_failure, "cannot read " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) lines.push_back(std::move(line));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            apply(json::parse(lines[i]));
        } catch (const std::exception& e) {
            // A torn final line from an interrupted append is dropped.
            if (i + 1 == lines.size()) break;
            throw Error(Errc::storage_failure, path.string() + ":" + std::to_string(i + 1) +
                                                   ": " + e.what());
        }
    }
}

void Store::append(const char* file, const json& line) {
    const auto path = dir_ / file;
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << line.dump() << '\n';
    out.flush();
    if (!out) throw Error(Errc::storage_failure, "cannot write " + path.string());
}

std::string Store::put_article(ArticleRecord record) {
    if (is_blank(record.raw_text)) throw Error(Errc::validation_error, "article raw_text is empty");
    if (record.source.empty()) throw Error(Errc::validation_error, "article source is empty");
    record.id = article_id_for(record);
    std::unique_lock lock(mutex_);
    append(kArticles, to_json(record));
    auto id = record.id;
    articles_[id] = std::move(record);
    return id;
}

std::optional<ArticleRecord> Store::article(std::string_view id) const {
    std::shared_lock lock(mutex_);
    auto it = articles_.find(id);
    if (it == articles_.end()) return std::nullopt;
    return it->second;
}

std::vector<ArticleRecord> Store::articles() const {
    std::shared_lock lock(mutex_);
    std::vector<ArticleRecord> out;
    for (const auto& [_, a] : articles_) out.push_back(a);
    return out;
}

void Store::put_breadcrumb(const Breadcrumb& breadcrumb) {
    std::unique_lock lock(mutex_);
    append(kBreadcrumbs, to_json(breadcrumb));
    breadcrumbs_[breadcrumb.article_id] = breadcrumb;
}

std::optional<Breadcrumb> Store::breadcrumb(std::string_view article_id) const {
    std::shared_lock lock(mutex_);
    auto it = breadcrumbs_.find(article_id);
    if (it == breadcrumbs_.end()) return std::nullopt;
    return it->second;
}

std::vector<Breadcrumb> Store::query(const QueryFilter& filter) const {
    std::vector<Breadcrumb> out;
    {
        std::shared_lock lock(mutex_);
        for (const auto& [_, b] : breadcrumbs_) {
            if (filter.matches(b)) out.push_back(b);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Breadcrumb& a, const Breadcrumb& b) {
        if (a.maturity != b.maturity) return a.maturity > b.maturity;
        if (a.published != b.published) return a.published > b.published;
        return a.article_id < b.article_id;
    });
    return out;
}

Stats Store::stats(const QueryFilter& filter, std::size_t k) const {
    Stats s;
    std::map<std::string, int> attackers, techniques, malware, vulns, topics;
    auto count_distinct = [](std::map<std::string, int>& into, const std::vector<std::string>& vs) {
        for (const auto& v : std::set<std::string>(vs.begin(), vs.end())) ++into[v];
    };
    for (const auto& b : query(filter)) {
        ++s.matched;
        ++s.count_by_month[YearMonth::of(b.published)];
        count_distinct(attackers, b.tags.values(TagCategory::attacker_name));
        count_distinct(techniques, b.tags.values(TagCategory::attack_type));
        count_distinct(malware, b.tags.values(TagCategory::malware_name));
        count_distinct(vulns, b.tags.values(TagCategory::vulnerability));
        for (auto t : std::set<TrainingTopic>(b.topics.begin(), b.topics.end())) {
            ++topics[std::string(cesoforge::to_string(t))];
        }
    }
    s.top_attackers = top_k(attackers, k);
    s.top_techniques = top_k(techniques, k);
    s.top_malware = top_k(malware, k);
    s.top_vulnerabilities = top_k(vulns, k);
    s.topic_breakdown = top_k(topics, kAllTopics.size());
    return s;
}

void Store::put_incident(const StoredIncident& incident) {
    if (incident.id.empty() || incident.name_tag.empty()) {
        throw Error(Errc::validation_error, "incident needs an id and a name tag");
    }
    std::unique_lock lock(mutex_);
    append(kIncidents, to_json(incident));
    if (!incidents_.contains(incident.id)) incident_order_.push_back(incident.id);
    incidents_[incident.id] = incident;
}

std::optional<StoredIncident> Store::incident(std::string_view id) const {
    std::shared_lock lock(mutex_);
    auto it = incidents_.find(id);
    if (it == incidents_.end()) return std::nullopt;
    return it->second;
}

std::optional<StoredIncident> Store::incident_by_name(std::string_view name_tag) const {
    std::shared_lock lock(mutex_);
    // Latest stored incident wins for a reused name.
    for (auto it = incident_order_.rbegin(); it != incident_order_.rend(); ++it) {
        const auto& inc = incidents_.find(*it)->second;
        if (inc.name_tag == name_tag) return inc;
    }
    return std::nullopt;
}

std::vector<StoredIncident> Store::incidents() const {
    std::shared_lock lock(mutex_);
    std::vector<StoredIncident> out;
    for (const auto& id : incident_order_) out.push_back(incidents_.find(id)->second);
    return out;
}

void Store::put_profile(const AptProfile& profile) {
    std::unique_lock lock(mutex_);
    append(kProfiles, to_json(profile));
    profiles_[profile.group_id] = profile;
}

std::optional<AptProfile> Store::profile(std::string_view group_id_or_name) const {
    std::shared_lock lock(mutex_);
    if (auto it = profiles_.find(group_id_or_name); it != profiles_.end()) return it->second;
    const auto wanted = lower(std::string(group_id_or_name));
    for (const auto& [_, p] : profiles_) {
        if (lower(p.name) == wanted) return p;
        for (const auto& a : p.aliases) {
            if (lower(a) == wanted) return p;
        }
    }
    return std::nullopt;
}

std::vector<AptProfile> Store::profiles() const {
    std::shared_lock lock(mutex_);
    std::vector<AptProfile> out;
    for (const auto& [_, p] : profiles_) out.push_back(p);
    return out;
}

void Store::put_scenario(const StoredScenario& scenario) {
    std::unique_lock lock(mutex_);
    append(kScenarios, to_json(scenario));
    scenarios_[scenario.id] = scenario;
}

std::optional<StoredScenario> Store::scenario(std::string_view id) const {
    std::shared_lock lock(mutex_);
    auto it = scenarios_.find(id);
    if (it == scenarios_.end()) return std::nullopt;
    return it->second;
}

std::vector<StoredScenario> Store::scenarios() const {
    std::shared_lock lock(mutex_);
    std::vector<StoredScenario> out;
    for (const auto& [_, s] : scenarios_) out.push_back(s);
    return out;
}

std::filesystem::path resolve_data_dir(const std::optional<std::string>& flag) {
    if (flag && !flag->empty()) return *flag;
    if (const char* env = std::getenv("CESOFORGE_DATA"); env != nullptr && *env != '\0') {
        return env;
    }
    return "kdb";
}

}  // namespace cesoforge::kdb
