#include "cesoforge/service.hpp"

#include <httplib.h>

#include <csignal>
#include <fstream>
#include <sstream>

namespace cesoforge::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    send_json(res, error_body(code, message), status);
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(Errc::parse_failure, std::string("request body is not JSON: ") + e.what());
    }
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

kdb::QueryFilter filter_from_params(const httplib::Request& req) {
    if (req.has_param("filter")) return kdb::QueryFilter::from_json(json::parse(req.get_param_value("filter")));
    json j = json::object();
    for (const char* key : {"sector", "attack_type", "topic", "from", "to", "name_tag", "min_maturity"}) {
        if (req.has_param(key)) j[key] = req.get_param_value(key);
    }
    if (req.has_param("tags")) j["tags"] = split_csv(req.get_param_value("tags"));
    return kdb::QueryFilter::from_json(j);
}

int int_param(const httplib::Request& req, const char* key, int fallback) {
    if (!req.has_param(key)) return fallback;
    try {
        return std::stoi(req.get_param_value(key));
    } catch (const std::exception&) {
        throw Error(Errc::validation_error, std::string(key) + " must be an integer");
    }
}

template <typename T>
std::optional<T> opt_field(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::validation_error, std::string(key) + " has the wrong type");
    }
}

incgen::DraftOptions draft_options(const json& j) {
    incgen::DraftOptions o;
    if (auto v = opt_field<bool>(j, "allow_immature")) o.allow_immature = *v;
    if (auto v = opt_field<int>(j, "threshold")) o.threshold = *v;
    if (auto v = opt_field<int>(j, "inject_spacing")) o.inject_spacing = *v;
    if (auto v = opt_field<int>(j, "difficulty")) o.difficulty = *v;
    return o;
}

json incident_json(const StoredIncident& s) {
    auto j = to_json(s);
    j["report"] = incgen::render_report(s.draft);
    return j;
}

json scenario_summary(const StoredScenario& s) {
    return {{"id", s.id}, {"name", s.name}, {"created", format_timestamp(s.created)},
            {"objects", s.graph.objects().size()}, {"relationships", s.graph.relationships().size()}};
}

json trend_json(const mltp::TrendReport& r) {
    json series = json::array();
    for (const auto& p : r.series.points) series.push_back({{"month", p.month.str()}, {"count", p.count}});
    json fc = json::array();
    for (const auto& f : r.forecast) fc.push_back({{"month", f.month.str()}, {"value", f.value}, {"lo", f.lo}, {"hi", f.hi}});
    return {{"series", series}, {"forecast", fc}, {"stats", r.stats.to_json()}, {"markdown", r.markdown}, {"csv", r.csv}};
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
        try {
            h(req, res);
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, errc_name(Errc::parse_failure), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "Internal", e.what());
        }
    };
}

StoredScenario require_scenario(app::App& app, const std::string& id) {
    auto s = app.store().scenario(id);
    if (!s) throw Error(Errc::not_found, "no scenario " + id);
    return *s;
}

}  // namespace

int http_status(Errc code) noexcept {
    switch (code) {
        case Errc::not_found: return 404;
        case Errc::immature_source:
        case Errc::no_candidates:
        case Errc::empty_selection: return 409;
        case Errc::storage_failure:
        case Errc::io_failure:
        case Errc::fetch_failure:
        case Errc::adapter_unavailable: return 500;
        default: return 400;
    }
}

json error_body(std::string_view code, std::string_view message) {
    return {{"code", code}, {"message", message}};
}

void install_routes(httplib::Server& server, app::App& app, const ServeOptions& options) {
    server.Get("/api/articles", guarded([&](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& a : app.store().articles()) out.push_back(to_json(a));
        send_json(res, out);
    }));

    server.Post("/api/ingest", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto body = body_of(req);
        std::vector<std::string> inputs = opt_field<std::vector<std::string>>(body, "inputs").value_or(std::vector<std::string>{});
        std::optional<std::filesystem::path> staging;
        if (body.contains("documents")) {
            staging = std::filesystem::temp_directory_path() /
                      ("cesoforge-ingest-" + std::to_string(std::hash<std::string>{}(req.body)));
            std::filesystem::create_directories(*staging);
            std::size_t n = 0;
            for (const auto& d : body["documents"]) {
                const auto path = *staging / ("document-" + std::to_string(n++) + ".txt");
                std::ofstream(path) << d.get<std::string>();
                inputs.push_back(path.string());
            }
        }
        if (inputs.empty()) throw Error(Errc::validation_error, "nothing to ingest: give inputs or documents");
        const auto r = app.ingest(inputs, opt_field<bool>(body, "fetch").value_or(false),
                                  opt_field<std::string>(body, "source").value_or("api"));
        if (staging) std::filesystem::remove_all(*staging);
        json failures = json::array();
        for (const auto& f : r.failures) {
            failures.push_back({{"input", f.input}, {"code", errc_name(f.code)}, {"message", f.message}});
        }
        send_json(res, {{"ids", r.ids}, {"failures", failures}}, r.ids.empty() ? 400 : 201);
    }));

    server.Post("/api/extract", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto body = body_of(req);
        const auto ids = opt_field<std::vector<std::string>>(body, "articles").value_or(std::vector<std::string>{});
        json out = json::array();
        for (const auto& b : app.extract(ids)) out.push_back(to_json(b));
        send_json(res, out);
    }));

    server.Get("/api/breadcrumbs", guarded([&](const httplib::Request& req, httplib::Response& res) {
        json out = json::array();
        for (const auto& b : app.store().query(filter_from_params(req))) out.push_back(to_json(b));
        send_json(res, out);
    }));

    server.Get("/api/incidents", guarded([&](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& s : app.store().incidents()) {
            out.push_back({{"id", s.id}, {"name_tag", s.name_tag}, {"created", format_timestamp(s.created)},
                           {"maturity", s.draft.maturity}, {"injects", s.draft.injects.size()},
                           {"objects", s.draft.graph.objects().size()}});
        }
        send_json(res, out);
    }));

    server.Post("/api/incidents", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto body = body_of(req);
        const auto filter = body.contains("filter") ? kdb::QueryFilter::from_json(body["filter"]) : kdb::QueryFilter{};
        const auto k = opt_field<int>(body, "k").value_or(1);
        if (k < 1) throw Error(Errc::validation_error, "k must be at least 1");
        json out = json::array();
        for (const auto& s : app.incgen(filter, static_cast<std::size_t>(k), draft_options(body))) {
            out.push_back(incident_json(s));
        }
        send_json(res, out, 201);
    }));

    server.Get(R"(/api/incidents/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto s = app.store().incident(req.matches[1].str());
        if (!s) throw Error(Errc::not_found, "no incident " + req.matches[1].str());
        send_json(res, incident_json(*s));
    }));

    server.Patch(R"(/api/incidents/([^/]+)/injects/(\d+))",
                 guarded([&](const httplib::Request& req, httplib::Response& res) {
                     const auto body = body_of(req);
                     const auto s = app.patch_inject(req.matches[1].str(), std::stoul(req.matches[2].str()),
                                                     opt_field<int>(body, "difficulty"),
                                                     opt_field<int>(body, "timing_offset"),
                                                     opt_field<std::string>(body, "title"));
                     send_json(res, incident_json(s));
                 }));

    server.Post(R"(/api/incidents/([^/]+)/enhance)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto body = body_of(req);
        app::EnhanceRequest r;
        r.group = opt_field<std::string>(body, "group");
        if (auto f = opt_field<std::vector<std::string>>(body, "fragment")) r.merge.fragment.emplace(f->begin(), f->end());
        if (auto p = opt_field<std::vector<std::string>>(body, "phases")) r.merge.phases.emplace(p->begin(), p->end());
        r.draft = draft_options(body);
        const auto out = app.enhance(req.matches[1].str(), r);
        send_json(res, {{"incident", incident_json(out.incident)},
                        {"group_id", out.group_id},
                        {"added_objects", out.added_objects},
                        {"added_injects", out.added_injects}});
    }));

    server.Get("/api/apt", guarded([&](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& p : app.profiles()) {
            out.push_back({{"group_id", p.group_id}, {"name", p.name}, {"aliases", p.aliases},
                           {"bundle", ceso::bundle_json(p.graph)}});
        }
        send_json(res, out);
    }));

    server.Get("/api/apt/rank", guarded([&](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("incident")) throw Error(Errc::validation_error, "incident parameter required");
        json out = json::array();
        for (const auto& r : app.rank(req.get_param_value("incident"))) {
            out.push_back({{"group_id", r.group_id}, {"name", r.name}, {"score", r.score}});
        }
        send_json(res, out);
    }));

    server.Get("/api/scenarios", guarded([&](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& s : app.store().scenarios()) out.push_back(scenario_summary(s));
        send_json(res, out);
    }));

    server.Post("/api/scenarios", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto spec = cegen::ScenarioSpec::from_json(body_of(req));
        const auto s = app.cegen(spec, std::nullopt);
        auto out = scenario_summary(s);
        out["storyline"] = s.storyline;
        send_json(res, out, 201);
    }));

    server.Get(R"(/api/scenarios/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto s = require_scenario(app, req.matches[1].str());
        auto out = scenario_summary(s);
        out["spec"] = s.spec;
        out["storyline"] = s.storyline;
        send_json(res, out);
    }));

    server.Get(R"(/api/scenarios/([^/]+)/bundle)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        res.set_content(ceso::serialize_bundle(require_scenario(app, req.matches[1].str()).graph), "application/json");
    }));

    server.Get(R"(/api/scenarios/([^/]+)/msel)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        send_json(res, cegen::to_json(cegen::emit_msel(require_scenario(app, req.matches[1].str()).graph)));
    }));

    server.Get(R"(/api/scenarios/([^/]+)/markdown)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto s = require_scenario(app, req.matches[1].str());
        res.set_content(cegen::render_markdown(s.graph, cegen::emit_msel(s.graph), s.storyline), "text/markdown");
    }));

    server.Get("/api/trends", guarded([&](const httplib::Request& req, httplib::Response& res) {
        mltp::ForecastConfig cfg;
        cfg.p = int_param(req, "p", cfg.p);
        cfg.d = int_param(req, "d", cfg.d);
        cfg.q = int_param(req, "q", cfg.q);
        cfg.P = int_param(req, "P", cfg.P);
        cfg.D = int_param(req, "D", cfg.D);
        cfg.Q = int_param(req, "Q", cfg.Q);
        cfg.s = int_param(req, "s", cfg.s);
        cfg.horizon = int_param(req, "horizon", cfg.horizon);
        const auto top = int_param(req, "top", 10);
        send_json(res, trend_json(app.trends(filter_from_params(req), cfg, static_cast<std::size_t>(std::max(top, 0)))));
    }));

    if (options.ui_dir && std::filesystem::is_directory(*options.ui_dir)) {
        server.set_mount_point("/ui", options.ui_dir->string());
    }

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) {
            send_error(res, 404, errc_name(Errc::not_found), "no route for " + req.method + " " + req.path);
        } else {
            send_error(res, res.status, "HttpError", httplib::status_message(res.status));
        }
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        send_error(res, 500, "Internal", "unhandled exception");
    });
}

namespace {
httplib::Server* g_server = nullptr;
extern "C" void on_signal(int) {
    if (g_server != nullptr) g_server->stop();
}
}  // namespace

void serve(app::App& app, const ServeOptions& options) {
    httplib::Server server;
    install_routes(server, app, options);
    // No SO_REUSEPORT: a second instance on the same port must fail to bind.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
    if (!server.bind_to_port(options.host, options.port)) {
        throw Error(Errc::io_failure, "cannot bind " + options.host + ":" + std::to_string(options.port));
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen_after_bind();
    g_server = nullptr;
}

}  // namespace cesoforge::service
