#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "cesoforge/service.hpp"

using namespace cesoforge;
using nlohmann::json;

namespace {

const std::filesystem::path kFixtures = CESOFORGE_FIXTURE_DIR;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Running {
    std::filesystem::path data, ui;
    std::unique_ptr<app::App> app;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit Running(const std::string& name) {
        data = std::filesystem::temp_directory_path() / ("cesoforge-svc-" + name);
        ui = data.string() + "-ui";
        std::filesystem::remove_all(data);
        std::filesystem::remove_all(ui);
        std::filesystem::create_directories(ui);
        std::ofstream(ui / "index.html") << "<html>studio</html>";
        app::Options o;
        o.data_dir = data;
        o.seed = 5;
        app = std::make_unique<app::App>(o);
        service::ServeOptions so;
        so.ui_dir = ui;
        service::install_routes(server, *app, so);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~Running() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(60, 0);
        return c;
    }
};

json parse(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

void expect_error(const httplib::Result& r, int status, const std::string& code) {
    REQUIRE(r);
    CHECK(r->status == status);
    const auto j = json::parse(r->body);
    CHECK(j["code"] == code);
    CHECK(j["message"].is_string());
}

json post(httplib::Client& c, const std::string& path, const json& body) {
    return parse(c.Post(path, body.dump(), "application/json"));
}

}  // namespace

TEST_CASE("status mapping") {
    CHECK(service::http_status(Errc::not_found) == 404);
    CHECK(service::http_status(Errc::no_candidates) == 409);
    CHECK(service::http_status(Errc::invalid_property) == 400);
    CHECK(service::http_status(Errc::storage_failure) == 500);
    CHECK(service::error_body("NotFound", "x") == json{{"code", "NotFound"}, {"message", "x"}});
}

TEST_CASE("empty store and unknown ids") {
    Running s("empty");
    auto c = s.client();
    const auto r = c.Get("/api/articles");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body) == json::array());
    expect_error(c.Post("/api/incidents/intrusion-set--bad/enhance", "{}", "application/json"), 404, "NotFound");
    expect_error(c.Get("/api/incidents/intrusion-set--bad"), 404, "NotFound");
    expect_error(c.Get("/api/scenarios/grouping--bad/bundle"), 404, "NotFound");
    expect_error(c.Get("/api/scenarios/grouping--bad/msel"), 404, "NotFound");
    expect_error(c.Get("/api/nowhere"), 404, "NotFound");
    expect_error(c.Post("/api/ingest", "{}", "application/json"), 400, "ValidationError");
    expect_error(c.Post("/api/ingest", "{not json", "application/json"), 400, "ParseFailure");
    expect_error(c.Post("/api/incidents", R"({"k":1})", "application/json"), 409, "NoCandidates");
    expect_error(c.Get("/api/apt/rank"), 400, "ValidationError");
    const auto ui = c.Get("/ui/index.html");
    REQUIRE(ui);
    CHECK(ui->status == 200);
    CHECK(ui->body == "<html>studio</html>");
}

TEST_CASE("full workflow over HTTP") {
    Running s("flow");
    auto c = s.client();

    const auto ing = c.Post("/api/ingest", json{{"inputs", {(kFixtures / "corpus").string()}}}.dump(), "application/json");
    REQUIRE(ing);
    CHECK(ing->status == 201);
    CHECK(json::parse(ing->body)["ids"].size() == 20);
    const auto doc = c.Post("/api/ingest",
                            json{{"documents", {"published: 2022-03-30\nname_tag: pasted\n---\nhackers used phishing against banks"}}}.dump(),
                            "application/json");
    REQUIRE(doc);
    CHECK(doc->status == 201);
    CHECK(parse(c.Get("/api/articles")).size() == 21);

    CHECK(post(c, "/api/extract", json::object()).size() == 21);
    const auto pasted_id = json::parse(doc->body)["ids"][0].get<std::string>();
    CHECK(post(c, "/api/extract", {{"articles", {pasted_id}}}).size() == 1);
    expect_error(c.Post("/api/extract", R"({"articles":["art-none"]})", "application/json"), 404, "NotFound");

    const auto energy = parse(c.Get("/api/breadcrumbs?sector=energy"));
    CHECK_FALSE(energy.empty());
    for (const auto& b : energy) CHECK(b.dump().find("\"energy\"") != std::string::npos);
    const auto top = parse(c.Get("/api/breadcrumbs?min_maturity=185"));
    for (const auto& b : top) CHECK(b["maturity"] == 185);
    CHECK(parse(c.Get("/api/breadcrumbs?filter=" + httplib::detail::encode_url(R"({"min_maturity":185})"))) == top);
    expect_error(c.Get("/api/breadcrumbs?topic=NOPE"), 400, "ValidationError");

    const auto created = c.Post("/api/incidents", R"({"k":2})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto incidents = json::parse(created->body);
    REQUIRE(incidents.size() == 2);
    const auto id = incidents[0]["id"].get<std::string>();
    CHECK(parse(c.Get("/api/incidents/" + id))["id"] == id);
    CHECK(parse(c.Get("/api/incidents")).size() == 2);

    const auto groups = parse(c.Get("/api/apt"));
    CHECK(groups.size() == 6);
    const auto ranking = parse(c.Get("/api/apt/rank?incident=" + id));
    REQUIRE(ranking.size() == groups.size());
    for (std::size_t i = 1; i < ranking.size(); ++i) CHECK(ranking[i - 1]["score"] >= ranking[i]["score"]);

    expect_error(c.Post("/api/incidents/" + id + "/enhance", R"({"phases":["lunch"]})", "application/json"), 400,
                 "PreconditionViolation");
    const auto before = parse(c.Get("/api/incidents/" + id));
    const auto enhanced = post(c, "/api/incidents/" + id + "/enhance", {{"group", ranking[0]["group_id"]}});
    const auto after = parse(c.Get("/api/incidents/" + id));
    CHECK(after == enhanced["incident"]);
    CHECK(after["draft"]["injects"].size() >= before["draft"]["injects"].size());
    CHECK(enhanced["added_objects"].get<std::size_t>() > 0);

    expect_error(c.Patch("/api/incidents/" + id + "/injects/0", R"({"difficulty":9})", "application/json"), 400,
                 "InvalidProperty");
    expect_error(c.Patch("/api/incidents/" + id + "/injects/999", R"({"difficulty":2})", "application/json"), 404,
                 "NotFound");
    const auto patched = c.Patch("/api/incidents/" + id + "/injects/0", R"({"difficulty":3,"title":"Renamed"})",
                                 "application/json");
    REQUIRE(patched);
    CHECK(patched->status == 200);
    CHECK(parse(c.Get("/api/incidents/" + id))["draft"]["injects"][0]["title"] == "Renamed");

    const auto spec = slurp(kFixtures / "e2e/scenario.json");
    const auto sc = c.Post("/api/scenarios", spec, "application/json");
    REQUIRE(sc);
    CHECK(sc->status == 201);
    const auto sid = json::parse(sc->body)["id"].get<std::string>();
    const auto bundle = c.Get("/api/scenarios/" + sid + "/bundle");
    REQUIRE(bundle);
    CHECK(bundle->status == 200);
    const auto g = ceso::parse_bundle(bundle->body);
    CHECK(ceso::check(g).empty());
    const auto msel = parse(c.Get("/api/scenarios/" + sid + "/msel"));
    CHECK(msel["level"] == "scenario");
    CHECK(msel["children"][0]["children"][0]["children"][0]["level"] == "inject");
    // The renamed inject shows up in the scenario schedule.
    CHECK(msel.dump().find("Renamed") != std::string::npos);
    const auto md = c.Get("/api/scenarios/" + sid + "/markdown");
    REQUIRE(md);
    CHECK(md->body.find("## Resources Used") != std::string::npos);
    CHECK(parse(c.Get("/api/scenarios")).size() == 1);
    CHECK(parse(c.Get("/api/scenarios/" + sid))["spec"]["name"] == "Operation Dark Winter");
    expect_error(c.Post("/api/scenarios", R"({"name":"x","events":[{"name":"e","incidents":["ghost"]}]})",
                        "application/json"),
                 400, "UnresolvedIncident");

    const auto trends = parse(c.Get("/api/trends?sector=energy"));
    CHECK_FALSE(trends["series"].empty());
    CHECK(trends["markdown"].get<std::string>().find("# Trend report") == 0);
    CHECK(parse(c.Get("/api/trends?D=0&s=2"))["forecast"].size() == 6);
    expect_error(c.Get("/api/trends?horizon=0"), 400, "PreconditionViolation");
    expect_error(c.Get("/api/trends?horizon=abc"), 400, "ValidationError");
}
