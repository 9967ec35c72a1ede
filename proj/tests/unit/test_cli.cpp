#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cesoforge/cli.hpp"

namespace {

const std::filesystem::path kFixtures = CESOFORGE_FIXTURE_DIR;

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "cesoforge");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cesoforge::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path fresh(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cesoforge-cli-" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("usage handling") {
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    for (const char* sub : {"ingest", "extract", "incgen", "enhance", "trend", "cegen", "kappa", "serve"}) {
        CHECK(help.out.find(sub) != std::string::npos);
    }
    CHECK(run({}).code == 2);
    const auto unknown = run({"frobnicate"});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("Usage") != std::string::npos);
    CHECK(run({"cegen", "--out", "x"}).code == 2);
    CHECK(run({"incgen", "--difficulty", "9"}).code == 2);
    CHECK(run({"kappa", "--a", "/nonexistent"}).code == 2);
}

TEST_CASE("kappa on the annotation fixture") {
    const auto dir = kFixtures / "kappa";
    const auto r = run({"kappa", "--a", (dir / "annotator_a.jsonl").string(), "--b", (dir / "annotator_b.jsonl").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("kappa: 0.9767") != std::string::npos);
    const auto j = run({"--json", "kappa", "--a", (dir / "annotator_a.jsonl").string(), "--b",
                        (dir / "annotator_b.jsonl").string()});
    CHECK(nlohmann::json::parse(j.out)["p_o"] == "24461/24594");
}

TEST_CASE("domain errors exit 1") {
    const auto data = fresh("errors").string();
    const auto r = run({"--data-dir", data, "enhance", "intrusion-set--missing"});
    CHECK(r.code == 1);
    CHECK(r.err.find("NotFound") != std::string::npos);
    CHECK(run({"--data-dir", data, "incgen", "-k", "1"}).code == 1);
    CHECK(run({"--data-dir", data, "enhance"}).code == 2);
}

TEST_CASE("pipeline through the command line is deterministic") {
    auto pipeline = [](const std::string& name) {
        const auto root = fresh(name);
        const auto data = (root / "kdb").string();
        auto step = [&](std::vector<std::string> args) {
            args.insert(args.begin(), {"--data-dir", data, "--seed", "21"});
            const auto r = run(args);
            REQUIRE_MESSAGE(r.code == 0, r.err);
            return r;
        };
        step({"ingest", (kFixtures / "corpus").string()});
        step({"extract"});
        const auto inc = step({"--json", "incgen", "-k", "2", "--report-dir", (root / "reports").string()});
        CHECK(nlohmann::json::parse(inc.out).size() == 2);
        CHECK(std::distance(std::filesystem::directory_iterator(root / "reports"), {}) == 2);
        const auto ranks = step({"--json", "enhance", "--all", "--rank"});
        CHECK(nlohmann::json::parse(ranks.out).size() == 2);
        step({"enhance", "--all"});
        step({"trend", "--sector", "energy", "--out", (root / "trend").string()});
        CHECK(slurp(root / "trend/trend.csv").rfind("month,count,forecast,lo,hi\n", 0) == 0);
        step({"cegen", "--spec", (kFixtures / "e2e/scenario.json").string(), "--out", (root / "out").string()});
        return slurp(root / "out/bundle.json") + slurp(root / "out/msel.json") + slurp(root / "out/scenario.md");
    };
    const auto a = pipeline("det-a");
    CHECK(a == pipeline("det-b"));
}
