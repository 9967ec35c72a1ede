#pragma once

// Pipeline operations shared by the command line and the HTTP service.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cesoforge/apt.hpp"
#include "cesoforge/cegen.hpp"
#include "cesoforge/corpus.hpp"
#include "cesoforge/incgen.hpp"
#include "cesoforge/kdb.hpp"
#include "cesoforge/mltp.hpp"
#include "cesoforge/tagger.hpp"

namespace cesoforge::app {

struct Options {
    std::filesystem::path data_dir;
    std::filesystem::path resources = CESOFORGE_RESOURCE_DIR;
    std::optional<std::uint64_t> seed;
};

/// `--resources` flag value, else $CESOFORGE_RESOURCES, else the build tree's data/.
std::filesystem::path resolve_resources(const std::optional<std::string>& flag);

struct EnhanceRequest {
    std::optional<std::string> group;  // top-ranked profile when absent
    apt::MergeOptions merge;
    incgen::DraftOptions draft;
};

struct EnhanceResult {
    StoredIncident incident;
    std::string group_id;
    std::size_t added_objects = 0;
    std::size_t added_injects = 0;
};

/// Mutating operations are serialized; reads go straight to the store.
class App {
public:
    explicit App(Options options);

    kdb::Store& store() noexcept { return store_; }
    const kdb::Store& store() const noexcept { return store_; }
    const tagger::Resources& resources() const noexcept { return resources_; }
    const apt::SimilarityConfig& similarity() const noexcept { return similarity_; }
    const Options& options() const noexcept { return options_; }

    corpus::IngestResult ingest(const std::vector<std::string>& inputs, bool fetch, const std::string& source_label);
    /// Tags the given articles (all when empty). Throws NotFound.
    std::vector<Breadcrumb> extract(const std::vector<std::string>& article_ids);
    std::vector<StoredIncident> incgen(const kdb::QueryFilter& filter, std::size_t k,
                                       const incgen::DraftOptions& options = {});
    /// Throws NotFound for unknown incidents or groups.
    EnhanceResult enhance(std::string_view incident_id, const EnhanceRequest& request);
    std::vector<apt::Ranked> rank(std::string_view incident_id);
    StoredIncident patch_inject(std::string_view incident_id, std::size_t index, std::optional<int> difficulty,
                                std::optional<int> timing_offset, std::optional<std::string> title);
    StoredScenario cegen(const cegen::ScenarioSpec& spec, const std::optional<std::filesystem::path>& out_dir);
    mltp::TrendReport trends(const kdb::QueryFilter& filter, const mltp::ForecastConfig& cfg, std::size_t top = 10);

    /// Stored profiles; seeds the store from `<resources>/attack/*.json` when empty.
    std::vector<AptProfile> profiles();

private:
    /// Seeded runs get a per-operation factory keyed by the store contents so
    /// separate invocations never reuse ids.
    ceso::IdFactory id_factory(std::string_view operation, std::string_view key = {});
    StoredIncident require_incident(std::string_view id) const;

    Options options_;
    kdb::Store store_;
    tagger::Resources resources_;
    apt::SimilarityConfig similarity_;
    std::recursive_mutex write_mutex_;
};

}  // namespace cesoforge::app
