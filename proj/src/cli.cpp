#include "cesoforge/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "cesoforge/annoqa.hpp"
#include "cesoforge/app.hpp"
#include "cesoforge/errors.hpp"
#include "cesoforge/service.hpp"

namespace cesoforge::cli {

using nlohmann::json;

namespace {

struct Globals {
    std::optional<std::string> data_dir;
    std::optional<std::string> resources;
    std::optional<std::uint64_t> seed;
    bool json = false;
};

struct FilterFlags {
    std::vector<std::string> tags;
    std::optional<std::string> sector, attack_type, topic, from, to, name_tag;
    std::optional<int> min_maturity;

    void add(CLI::App* cmd) {
        cmd->add_option("--tag", tags, "Tag text that must appear (repeatable)");
        cmd->add_option("--sector", sector);
        cmd->add_option("--attack-type", attack_type);
        cmd->add_option("--topic", topic, "Training topic, e.g. PHISHING_SOCIAL_ENGINEERING");
        cmd->add_option("--from", from, "YYYY-MM-DD");
        cmd->add_option("--to", to, "YYYY-MM-DD");
        cmd->add_option("--name", name_tag);
        cmd->add_option("--min-maturity", min_maturity);
    }

    kdb::QueryFilter build() const {
        json j = json::object();
        if (!tags.empty()) j["tags"] = tags;
        auto put = [&](const char* k, const std::optional<std::string>& v) {
            if (v) j[k] = *v;
        };
        put("sector", sector);
        put("attack_type", attack_type);
        put("topic", topic);
        put("from", from);
        put("to", to);
        put("name_tag", name_tag);
        if (min_maturity) j["min_maturity"] = *min_maturity;
        return kdb::QueryFilter::from_json(j);
    }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw Error(Errc::io_failure, "cannot write " + p.string());
}

std::pair<std::string, int> split_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw Error(Errc::validation_error, "--bind must be host:port");
    try {
        return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
    } catch (const std::exception&) {
        throw Error(Errc::validation_error, "bad port in --bind " + bind);
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App cli{"Turn cyber-incident articles into STIX 2.1 exercise scenarios", "cesoforge"};
    cli.require_subcommand(1);
    Globals g;
    cli.add_option("--data-dir", g.data_dir, "Knowledge database directory (default $CESOFORGE_DATA or ./kdb)");
    cli.add_option("--resources", g.resources, "Gazetteers, topics and ATT&CK data (default $CESOFORGE_RESOURCES)");
    cli.add_option("--seed", g.seed, "Deterministic ids and timestamps");
    cli.add_flag("--json", g.json, "Machine-readable output");

    auto make_app = [&] {
        app::Options o;
        o.data_dir = kdb::resolve_data_dir(g.data_dir);
        o.resources = app::resolve_resources(g.resources);
        o.seed = g.seed;
        return std::make_unique<app::App>(o);
    };

    // ingest
    auto* ingest = cli.add_subcommand("ingest", "Normalize articles into the knowledge database");
    std::vector<std::string> inputs;
    bool fetch = false;
    std::string source = "cli";
    ingest->add_option("inputs", inputs, "Files, directories, URL lists or URLs")->required();
    ingest->add_flag("--fetch", fetch, "Allow HTTP(S) fetching");
    ingest->add_option("--source", source, "Source label");

    // extract
    auto* extract = cli.add_subcommand("extract", "Tag stored articles into breadcrumbs");
    std::vector<std::string> article_ids;
    extract->add_option("--article", article_ids, "Article ids (default: all)");

    // incgen
    auto* incgen_cmd = cli.add_subcommand("incgen", "Draft incidents from the most mature breadcrumbs");
    FilterFlags incgen_filter;
    incgen_filter.add(incgen_cmd);
    std::size_t k = 1;
    incgen::DraftOptions draft_opts;
    std::optional<std::string> report_dir;
    incgen_cmd->add_option("-k", k, "Number of incidents")->check(CLI::PositiveNumber);
    incgen_cmd->add_flag("--allow-immature", draft_opts.allow_immature);
    incgen_cmd->add_option("--threshold", draft_opts.threshold)->check(CLI::Range(0, 185));
    incgen_cmd->add_option("--difficulty", draft_opts.difficulty)->check(CLI::Range(1, 5));
    incgen_cmd->add_option("--report-dir", report_dir, "Write one Markdown report per incident");

    // enhance
    auto* enhance = cli.add_subcommand("enhance", "Merge an ATT&CK group profile into incidents");
    std::vector<std::string> enhance_ids;
    bool enhance_all = false, rank_only = false;
    std::optional<std::string> group;
    std::vector<std::string> fragment, phases;
    enhance->add_option("incidents", enhance_ids, "Incident ids or names");
    enhance->add_flag("--all", enhance_all, "Every stored incident");
    enhance->add_option("--group", group, "ATT&CK group id or name (default: top-ranked)");
    enhance->add_option("--fragment", fragment, "Donor object ids to merge");
    enhance->add_option("--phase", phases, "Kill-chain phases to keep");
    enhance->add_flag("--rank", rank_only, "Only print the similarity ranking");

    // trend
    auto* trend = cli.add_subcommand("trend", "Monthly incident counts and forecast");
    FilterFlags trend_filter;
    trend_filter.add(trend);
    mltp::ForecastConfig fc;
    std::optional<std::string> trend_out;
    std::size_t top = 10;
    trend->add_option("--p", fc.p);
    trend->add_option("--d", fc.d);
    trend->add_option("--q", fc.q);
    trend->add_option("--P", fc.P);
    trend->add_option("--D", fc.D);
    trend->add_option("--Q", fc.Q);
    trend->add_option("--season", fc.s);
    trend->add_option("--horizon", fc.horizon);
    trend->add_option("--top", top);
    trend->add_option("--out", trend_out, "Directory for trend.md and trend.csv");

    // cegen
    auto* cegen_cmd = cli.add_subcommand("cegen", "Build an exercise scenario from a spec");
    std::string spec_path, out_dir;
    cegen_cmd->add_option("--spec", spec_path, "ScenarioSpec JSON")->required()->check(CLI::ExistingFile);
    cegen_cmd->add_option("--out", out_dir, "Output directory")->required();

    // kappa
    auto* kappa_cmd = cli.add_subcommand("kappa", "Cohen's kappa between two annotation files");
    std::string ann_a, ann_b;
    kappa_cmd->add_option("--a", ann_a)->required()->check(CLI::ExistingFile);
    kappa_cmd->add_option("--b", ann_b)->required()->check(CLI::ExistingFile);

    // serve
    auto* serve_cmd = cli.add_subcommand("serve", "Run the HTTP/JSON service");
    std::string bind = "127.0.0.1:8787";
    std::optional<std::string> ui_dir;
    serve_cmd->add_option("--bind", bind, "host:port");
    serve_cmd->add_option("--ui", ui_dir, "Static UI directory served under /ui");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << cli.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << cli.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << cli.help();
        return 2;
    }

    try {
        if (*ingest) {
            auto a = make_app();
            const auto r = a->ingest(inputs, fetch, source);
            if (g.json) {
                json failures = json::array();
                for (const auto& f : r.failures) {
                    failures.push_back({{"input", f.input}, {"code", errc_name(f.code)}, {"message", f.message}});
                }
                out << json{{"ids", r.ids}, {"failures", failures}}.dump() << "\n";
            } else {
                out << "ingested " << r.ids.size() << " article(s)\n";
                for (const auto& f : r.failures) err << "failed " << f.input << ": " << f.message << "\n";
            }
            return r.ids.empty() && !r.failures.empty() ? 1 : 0;
        }
        if (*extract) {
            auto a = make_app();
            const auto crumbs = a->extract(article_ids);
            if (g.json) {
                json arr = json::array();
                for (const auto& b : crumbs) arr.push_back(to_json(b));
                out << arr.dump() << "\n";
            } else {
                for (const auto& b : crumbs) out << b.article_id << "\t" << b.maturity << "\t" << b.name_tag << "\n";
            }
            return 0;
        }
        if (*incgen_cmd) {
            auto a = make_app();
            const auto incidents = a->incgen(incgen_filter.build(), k, draft_opts);
            json arr = json::array();
            for (const auto& s : incidents) {
                if (report_dir) write_text(std::filesystem::path(*report_dir) / (s.name_tag + ".md"), incgen::render_report(s.draft));
                if (g.json) {
                    arr.push_back(to_json(s));
                } else {
                    out << s.id << "\t" << s.name_tag << "\tmaturity " << s.draft.maturity << "\t" << s.draft.injects.size()
                        << " inject(s)\n";
                }
            }
            if (g.json) out << arr.dump() << "\n";
            return 0;
        }
        if (*enhance) {
            auto a = make_app();
            if (enhance_all) {
                for (const auto& s : a->store().incidents()) enhance_ids.push_back(s.id);
            }
            if (enhance_ids.empty()) throw CLI::ValidationError("enhance", "give incident ids or --all");
            json arr = json::array();
            for (const auto& id : enhance_ids) {
                if (rank_only) {
                    json ranks = json::array();
                    for (const auto& r : a->rank(id)) {
                        if (g.json) {
                            ranks.push_back({{"group_id", r.group_id}, {"name", r.name}, {"score", r.score}});
                        } else {
                            out << id << "\t" << r.group_id << "\t" << r.name << "\t" << r.score << "\n";
                        }
                    }
                    arr.push_back({{"incident", id}, {"ranking", ranks}});
                    continue;
                }
                app::EnhanceRequest req;
                req.group = group;
                if (!fragment.empty()) req.merge.fragment.emplace(fragment.begin(), fragment.end());
                if (!phases.empty()) req.merge.phases.emplace(phases.begin(), phases.end());
                const auto r = a->enhance(id, req);
                if (g.json) {
                    arr.push_back({{"incident", r.incident.id}, {"group_id", r.group_id},
                                   {"added_objects", r.added_objects}, {"added_injects", r.added_injects}});
                } else {
                    out << r.incident.id << "\t" << r.incident.name_tag << "\tmerged " << r.group_id << ": +"
                        << r.added_objects << " object(s), " << r.incident.draft.injects.size() << " inject(s)\n";
                }
            }
            if (g.json) out << arr.dump() << "\n";
            return 0;
        }
        if (*trend) {
            auto a = make_app();
            const auto r = a->trends(trend_filter.build(), fc, top);
            if (trend_out) {
                write_text(std::filesystem::path(*trend_out) / "trend.md", r.markdown);
                write_text(std::filesystem::path(*trend_out) / "trend.csv", r.csv);
            }
            out << (g.json ? r.csv : r.markdown);
            return 0;
        }
        if (*cegen_cmd) {
            auto a = make_app();
            const auto spec = cegen::ScenarioSpec::from_json(json::parse(slurp(spec_path)));
            const auto s = a->cegen(spec, std::filesystem::path(out_dir));
            if (g.json) {
                out << json{{"id", s.id}, {"name", s.name}, {"out", out_dir}}.dump() << "\n";
            } else {
                out << "scenario " << s.id << " written to " << out_dir << "\n";
            }
            return 0;
        }
        if (*kappa_cmd) {
            const auto la = annoqa::token_labels(slurp(ann_a));
            const auto lb = annoqa::token_labels(slurp(ann_b));
            const auto m = annoqa::contingency(la, lb, annoqa::default_categories());
            const auto r = annoqa::kappa(m);
            if (g.json) {
                out << json{{"p_o", r.p_o.str()}, {"p_e", r.p_e.str()}, {"kappa", r.kappa.str()},
                            {"kappa_value", r.kappa.value()}, {"counts", m.counts}}
                           .dump()
                    << "\n";
            } else {
                out << annoqa::report(m, r);
            }
            return 0;
        }
        if (*serve_cmd) {
            auto a = make_app();
            service::ServeOptions so;
            std::tie(so.host, so.port) = split_bind(bind);
            if (ui_dir) so.ui_dir = *ui_dir;
            err << "serving on http://" << so.host << ":" << so.port << "\n";
            service::serve(*a, so);
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << errc_name(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        err << "ParseFailure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace cesoforge::cli
