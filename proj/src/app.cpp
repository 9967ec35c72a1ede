#include "cesoforge/app.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cesoforge/errors.hpp"
#include "cesoforge/hashing.hpp"

namespace cesoforge::app {

std::filesystem::path resolve_resources(const std::optional<std::string>& flag) {
    if (flag && !flag->empty()) return *flag;
    if (const char* env = std::getenv("CESOFORGE_RESOURCES"); env != nullptr && *env != '\0') return env;
    return CESOFORGE_RESOURCE_DIR;
}

App::App(Options options)
    : options_(std::move(options)),
      store_(options_.data_dir),
      resources_(tagger::Resources::load(options_.resources)) {
    const auto conf = options_.resources / "similarity.conf";
    similarity_ = std::filesystem::exists(conf) ? apt::SimilarityConfig::load(conf) : apt::SimilarityConfig::defaults();
}

ceso::IdFactory App::id_factory(std::string_view operation, std::string_view key) {
    if (!options_.seed) return ceso::IdFactory();
    std::ostringstream fp;
    fp << operation << '|' << key << '|' << store_.articles().size() << '|' << store_.incidents().size() << '|'
       << store_.scenarios().size();
    for (const auto& s : store_.incidents()) fp << '|' << s.draft.graph.objects().size();
    return ceso::IdFactory(fnv1a64(fp.str(), *options_.seed));
}

StoredIncident App::require_incident(std::string_view id) const {
    auto s = store_.incident(id);
    if (!s) s = store_.incident_by_name(id);
    if (!s) throw Error(Errc::not_found, "no incident " + std::string(id));
    return *s;
}

corpus::IngestResult App::ingest(const std::vector<std::string>& inputs, bool fetch, const std::string& source_label) {
    std::lock_guard lock(write_mutex_);
    corpus::IngestOptions opts;
    opts.source_label = source_label;
    opts.fetch = fetch;
    const auto stopwords = options_.resources / "stopwords.txt";
    if (std::filesystem::exists(stopwords)) opts.config.stopword_list = corpus::load_stopwords(stopwords);
    return corpus::ingest(inputs, opts, store_);
}

std::vector<Breadcrumb> App::extract(const std::vector<std::string>& article_ids) {
    std::lock_guard lock(write_mutex_);
    std::vector<ArticleRecord> articles;
    if (article_ids.empty()) {
        articles = store_.articles();
    } else {
        for (const auto& id : article_ids) {
            auto a = store_.article(id);
            if (!a) throw Error(Errc::not_found, "no article " + id);
            articles.push_back(std::move(*a));
        }
    }
    auto ids = id_factory("extract");
    std::vector<Breadcrumb> out;
    for (const auto& a : articles) {
        const auto tags = tagger::tag_text(a.normalized_text, resources_.gazetteers, a.id);
        auto b = tagger::to_breadcrumb(a, tags, resources_, ids);
        store_.put_breadcrumb(b);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<StoredIncident> App::incgen(const kdb::QueryFilter& filter, std::size_t k,
                                        const incgen::DraftOptions& options) {
    std::lock_guard lock(write_mutex_);
    auto ids = id_factory("incgen", filter.to_json().dump());
    auto drafts = incgen::draft_from_query(store_, filter, k, ids, options);
    std::vector<StoredIncident> out;
    for (auto& d : drafts) {
        StoredIncident s;
        s.id = d.root;
        s.name_tag = d.name_tag;
        s.created = ids.now();
        s.draft = std::move(d);
        store_.put_incident(s);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<AptProfile> App::profiles() {
    auto stored = store_.profiles();
    if (!stored.empty()) return stored;
    std::lock_guard lock(write_mutex_);
    stored = store_.profiles();
    if (!stored.empty()) return stored;
    const auto dir = options_.resources / "attack";
    if (!std::filesystem::is_directory(dir)) return {};
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        std::ostringstream ss;
        ss << in.rdbuf();
        for (const auto& p : apt::ingest_attack_text(ss.str())) store_.put_profile(p);
    }
    return store_.profiles();
}

std::vector<apt::Ranked> App::rank(std::string_view incident_id) {
    const auto incident = require_incident(incident_id);
    return apt::rank_apts(incident.draft, profiles(), similarity_);
}

EnhanceResult App::enhance(std::string_view incident_id, const EnhanceRequest& request) {
    std::lock_guard lock(write_mutex_);
    auto incident = require_incident(incident_id);
    const auto all = profiles();
    std::optional<AptProfile> donor;
    if (request.group) {
        donor = store_.profile(*request.group);
        if (!donor) throw Error(Errc::not_found, "no APT group " + *request.group);
    } else {
        const auto ranked = apt::rank_apts(incident.draft, all, similarity_);
        if (ranked.empty()) throw Error(Errc::not_found, "no APT profiles loaded");
        donor = all[ranked.front().index];
    }
    auto ids = id_factory("enhance", incident.id + "|" + donor->group_id);
    auto merged = apt::merge(incident.draft, *donor, ids, request.merge);

    int start = 0;
    for (const auto& p : merged.injects) start = std::max(start, p.timing_offset);
    auto added = incgen::scaffold_injects(merged.graph, ids, start, request.draft, "apt:" + donor->group_id);
    const auto added_injects = added.size();
    for (auto& p : added) merged.injects.push_back(std::move(p));
    incgen::validate_draft(merged);

    EnhanceResult r;
    r.group_id = donor->group_id;
    r.added_objects = merged.graph.objects().size() - incident.draft.graph.objects().size();
    r.added_injects = added_injects;
    incident.draft = std::move(merged);
    store_.put_incident(incident);
    r.incident = std::move(incident);
    return r;
}

StoredIncident App::patch_inject(std::string_view incident_id, std::size_t index, std::optional<int> difficulty,
                                 std::optional<int> timing_offset, std::optional<std::string> title) {
    std::lock_guard lock(write_mutex_);
    auto incident = require_incident(incident_id);
    incgen::sync_inject(incident.draft, index, difficulty, timing_offset, std::move(title));
    incgen::validate_draft(incident.draft);
    store_.put_incident(incident);
    return incident;
}

StoredScenario App::cegen(const cegen::ScenarioSpec& spec, const std::optional<std::filesystem::path>& out_dir) {
    std::lock_guard lock(write_mutex_);
    auto ids = id_factory("cegen", spec.to_json().dump());
    return cegen::generate(spec, store_, ids, out_dir);
}

mltp::TrendReport App::trends(const kdb::QueryFilter& filter, const mltp::ForecastConfig& cfg, std::size_t top) {
    return mltp::trend_report(store_, filter, cfg, top);
}

}  // namespace cesoforge::app
