#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "cesoforge/corpus.hpp"

using namespace cesoforge;
using namespace cesoforge::corpus;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cesoforge_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

PipelineConfig shipped_config() {
    PipelineConfig cfg;
    cfg.stopword_list = load_stopwords(std::filesystem::path(CESOFORGE_RESOURCE_DIR) / "stopwords.txt");
    return cfg;
}

std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> atoms{
        "Ransomware", " ", "  ", "\n", "\t", ".", "?", "!", "<b>", "</b>", "<script>x=1</script>",
        "&amp;", "&amp;amp;", "&lt;", "&gt;", "&quot;", "https://evil.example/x", "www.site.org",
        "/etc/passwd", "C:\\temp", "~/x", "Subscribe", "subscribe.", "\xe2\x80\x99", "\xe2\x80\x94",
        "\xff", "\xc3\xa9t\xc3\xa9", "\x01", "U.S.", "CVE-2021-40444", "(APT29)", "a|b", "x\"www.y",
        "100%", "$5", "e.g.", "-", "'", "\r\n", "\xc2\x85",
    };
    std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
    std::uniform_int_distribution<int> len(0, 30);
    std::string out;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) out += atoms[pick(rng)];
    return out;
}

}  // namespace

TEST_CASE("reference corpus line is reproduced byte for byte") {
    const auto cfg = shipped_config();
    const auto text = normalize_text(
        "<p>REvil/Sodinokibi ransomware targets Chinese users with DHL spam</p>", cfg);
    const std::vector<std::string> lines{text};
    CHECK(emit_jsonl(lines) ==
          "{\"text\":\"revil sodinokibi ransomware targets chinese users with dhl spam\"}\n");
}

TEST_CASE("normalization removes markup, urls, paths and boilerplate") {
    const auto cfg = shipped_config();
    CHECK(normalize_text("Read more at https://example.com/a?b=1 now", cfg) == "read more at now");
    CHECK(normalize_text("Dropped to C:\\Users\\Public and /tmp/x.sh", cfg) == "dropped to and");
    CHECK(normalize_text("Tom &amp; Jerry&nbsp;&lt;3", cfg) == "tom & jerry 3");
    CHECK(normalize_text("<script>var a=1;</script>Hello <b>World</b>", cfg) == "hello world");
    CHECK(normalize_text("It\xe2\x80\x99s here\n\n\nSubscribe to our newsletter", cfg) == "it's here\nto our");
    CHECK(normalize_text("   \n\t ", cfg).empty());
}

TEST_CASE("property: normalization is idempotent and leaves no markup") {
    const auto cfg = shipped_config();
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto raw = random_text(rng);
        const auto once = normalize_text(raw, cfg);
        CHECK_MESSAGE(normalize_text(once, cfg) == once, raw);
        CHECK(once.find('<') == std::string::npos);
        CHECK(once.find("://") == std::string::npos);
        CHECK(once.find("\n\n") == std::string::npos);
        for (unsigned char c : once) {
            CHECK((c >= 0x20 || c == '\n'));
            CHECK(!(c >= 'A' && c <= 'Z'));
        }
    }
}

TEST_CASE("sentence splitting") {
    CHECK(split_sentences("a. b? c!") == std::vector<std::string>{"a.", "b?", "c!"});
    CHECK(split_sentences("the u.s. agency warned. attacks rose") ==
          std::vector<std::string>{"the u.s. agency warned.", "attacks rose"});
    CHECK(split_sentences("line one\nline two") == std::vector<std::string>{"line one", "line two"});
    CHECK(split_sentences("what?! really").size() == 2);
    CHECK(split_sentences("").empty());
}

TEST_CASE("property: splitting loses only whitespace") {
    std::mt19937_64 rng(12);
    const auto cfg = shipped_config();
    for (int i = 0; i < 500; ++i) {
        const auto text = normalize_text(random_text(rng), cfg);
        std::string joined;
        for (const auto& s : split_sentences(text)) joined += s;
        std::string squeezed;
        for (char c : text) {
            if (c != ' ' && c != '\n') squeezed.push_back(c);
        }
        std::string joined_squeezed;
        for (char c : joined) {
            if (c != ' ' && c != '\n') joined_squeezed.push_back(c);
        }
        CHECK(joined_squeezed == squeezed);
    }
}

TEST_CASE("jsonl round trip") {
    const std::vector<std::string> texts{"a \"quoted\" line", "caf\xc3\xa9", ""};
    CHECK(parse_jsonl(emit_jsonl(texts)) == texts);
    CHECK_THROWS_AS(parse_jsonl("{\"nope\":1}\n"), Error);
}

TEST_CASE("front matter") {
    const auto doc = parse_document(
        "title: Qbot hits energy\nurl: https://news.example/qbot\npublished: 2021-05-04\n---\nBody text.\n");
    CHECK(doc.title == "Qbot hits energy");
    CHECK(doc.url == "https://news.example/qbot");
    REQUIRE(doc.published.has_value());
    CHECK(format_date(*doc.published) == "2021-05-04");
    CHECK(doc.body == "Body text.\n");

    const auto plain = parse_document("No front matter: here\nJust text.");
    CHECK(plain.body == "No front matter: here\nJust text.");
    CHECK(plain.title.empty());
    CHECK(slugify("Qbot hits Energy!") == "qbot-hits-energy");
}

TEST_CASE("ingest stores articles and records per-item failures") {
    const auto dir = temp_dir("ingest");
    const auto docs = dir / "docs";
    std::filesystem::create_directories(docs);
    write(docs / "a.txt", "title: First\npublished: 2021-02-03\n---\nRansomware hits hospital.");
    write(docs / "b.html", "<p>Phishing wave</p>");
    write(docs / "empty.txt", "  \n");
    write(docs / "ignored.bin", "zzz");

    kdb::Store store(dir / "kdb");
    IngestOptions opt;
    opt.source_label = "test";
    opt.config = shipped_config();
    const std::vector<std::string> inputs{docs.string(), (dir / "missing.txt").string(),
                                          "http://127.0.0.1:1/x"};
    const auto result = ingest(inputs, opt, store);
    CHECK(result.ids.size() == 2);
    REQUIRE(result.failures.size() == 3);
    CHECK(result.failures[0].code == Errc::validation_error);  // blank article
    CHECK(result.failures[1].code == Errc::parse_failure);
    CHECK(result.failures[2].code == Errc::fetch_failure);  // fetching disabled

    const auto a = store.article(result.ids[0]);
    REQUIRE(a.has_value());
    CHECK(a->name_tag == "first");
    CHECK(format_date(a->published) == "2021-02-03");
    CHECK(a->normalized_text == "first\nransomware hits hospital.");

    // Re-ingesting upserts.
    const auto again = ingest(inputs, opt, store);
    CHECK(again.ids == result.ids);
    CHECK(store.articles().size() == 2);

    // Unreachable host with fetching on.
    IngestOptions fetch_opt = opt;
    fetch_opt.fetch = true;
    const std::vector<std::string> urls{"http://127.0.0.1:1/unreachable"};
    const auto fetched = ingest(urls, fetch_opt, store);
    CHECK(fetched.ids.empty());
    REQUIRE(fetched.failures.size() == 1);
    CHECK(fetched.failures[0].code == Errc::fetch_failure);

    // Injected fetcher.
    fetch_opt.fetcher = [](const std::string&) { return std::string("title: Remote\n---\nAPT28 strikes again."); };
    fetch_opt.fallback_date = parse_date("2022-01-15");
    const auto remote = ingest(urls, fetch_opt, store);
    REQUIRE(remote.ids.size() == 1);
    const auto r = store.article(remote.ids[0]);
    CHECK(r->url == "http://127.0.0.1:1/unreachable");
    CHECK(format_date(r->published) == "2022-01-15");
    std::filesystem::remove_all(dir);
}
