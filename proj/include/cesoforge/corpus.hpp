#pragma once

// Incident corpus pipeline: cleaning, sentence splitting, JSONL emission and
// article ingestion into the knowledge database.

#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cesoforge/errors.hpp"
#include "cesoforge/kdb.hpp"
#include "cesoforge/records.hpp"

namespace cesoforge::corpus {

struct PipelineConfig {
    std::set<std::string, std::less<>> stopword_list;
    bool strip_html = true;
    bool lowercase = true;
    bool spell_correct = false;
    /// ASCII punctuation that survives cleaning; all other ASCII punctuation
    /// becomes whitespace.
    std::set<char> punctuation_keep{'.', ',', ';', ':', '!', '?', '\'', '-', '&', '%', '$'};
    /// Applied per word when `spell_correct` is set.
    std::function<std::string(std::string_view)> corrector;
};

/// One word per line; blank lines and `#` comments ignored.
std::set<std::string, std::less<>> load_stopwords(const std::filesystem::path& path);

std::string normalize_text(std::string_view raw, const PipelineConfig& config);

std::vector<std::string> split_sentences(std::string_view text);
const std::set<std::string, std::less<>>& abbreviations();

/// One `{"text":...}` object per line.
std::string emit_jsonl(std::span<const std::string> texts);
std::string emit_jsonl(std::span<const ArticleRecord> articles);
std::vector<std::string> parse_jsonl(std::string_view jsonl);

/// A document split into optional `key: value` front matter and body.
/// Front matter is a leading block of `key: value` lines closed by `---`.
struct Document {
    std::string title;
    std::optional<std::string> url;
    std::optional<Date> published;
    std::string name_tag;
    std::string body;
};
Document parse_document(std::string_view text);

/// Lowercase ASCII slug, words joined by '-'.
std::string slugify(std::string_view text);

using Fetcher = std::function<std::string(const std::string& url)>;
/// HTTP(S) GET; throws FetchFailure.
std::string http_fetch(const std::string& url);

struct IngestOptions {
    std::string source_label;
    bool fetch = false;
    PipelineConfig config;
    Fetcher fetcher = http_fetch;
    /// Date used when a document has no `published` front matter and no
    /// file timestamp applies (fetched pages).
    std::optional<Date> fallback_date;
};

struct IngestFailure {
    std::string input;
    Errc code;
    std::string message;
};

struct IngestResult {
    std::vector<std::string> ids;
    std::vector<IngestFailure> failures;
};

/// Each input is a file, a directory of `.txt/.html/.htm/.md` files, or with
/// `fetch` enabled, a newline-separated URL list file or a URL. Per-item
/// failures are recorded and the remaining items still processed.
IngestResult ingest(std::span<const std::string> inputs, const IngestOptions& options,
                    kdb::Store& store);

}  // namespace cesoforge::corpus
