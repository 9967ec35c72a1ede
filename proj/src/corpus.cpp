#include "cesoforge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace cesoforge::corpus {

namespace {

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

// Invalid UTF-8 sequences become a space.
std::string sanitize_utf8(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        const auto c = static_cast<unsigned char>(in[i]);
        std::size_t len = 0;
        if (c < 0x80) {
            len = 1;
        } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            len = 4;
        }
        bool ok = len > 0 && i + len <= in.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            ok = (static_cast<unsigned char>(in[i + k]) & 0xC0) == 0x80;
        }
        if (ok && len == 3) {
            const auto c1 = static_cast<unsigned char>(in[i + 1]);
            ok = !(c == 0xE0 && c1 < 0xA0) && !(c == 0xED && c1 >= 0xA0);
        }
        if (ok && len == 4) {
            const auto c1 = static_cast<unsigned char>(in[i + 1]);
            ok = !(c == 0xF0 && c1 < 0x90) && !(c == 0xF4 && c1 >= 0x90);
        }
        if (ok) {
            out.append(in.substr(i, len));
            i += len;
        } else {
            out.push_back(' ');
            ++i;
        }
    }
    return out;
}

// Typographic punctuation onto ASCII; zero-width and C1 controls dropped.
std::string map_unicode(std::string_view in) {
    static const std::vector<std::pair<std::string_view, std::string_view>> kMap{
        {"‘", "'"},  {"’", "'"},   {"“", "\""}, {"”", "\""},
        {"–", "-"},  {"—", " - "}, {"…", "..."}, {" ", " "},
        {"​", ""},   {"‌", ""},    {"‍", ""},    {"﻿", ""},
    };
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        bool replaced = false;
        for (const auto& [from, to] : kMap) {
            if (in.substr(i, from.size()) == from) {
                out.append(to);
                i += from.size();
                replaced = true;
                break;
            }
        }
        if (replaced) continue;
        const auto c = static_cast<unsigned char>(in[i]);
        if (c == 0xC2 && i + 1 < in.size() && static_cast<unsigned char>(in[i + 1]) < 0xA0) {
            i += 2;  // C1 control
            continue;
        }
        out.push_back(in[i]);
        ++i;
    }
    return out;
}

std::string decode_entities_once(std::string_view in) {
    static const std::vector<std::pair<std::string_view, std::string_view>> kEntities{
        {"&amp;", "&"}, {"&lt;", "<"},  {"&gt;", ">"},   {"&quot;", "\""},
        {"&#39;", "'"}, {"&apos;", "'"}, {"&nbsp;", " "}, {"&#x27;", "'"},
    };
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        bool replaced = false;
        if (in[i] == '&') {
            for (const auto& [from, to] : kEntities) {
                if (in.substr(i, from.size()) == from) {
                    out.append(to);
                    i += from.size();
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) out.push_back(in[i++]);
    }
    return out;
}

std::string strip_html(std::string text) {
    for (int guard = 0; guard < 8; ++guard) {
        auto decoded = decode_entities_once(text);
        if (decoded == text) break;
        text = std::move(decoded);
    }
    static const std::regex blocks("<(script|style)[^>]*>[\\s\\S]*?</(script|style)\\s*>",
                                   std::regex::icase);
    static const std::regex tags("<[^<>]*>");
    text = std::regex_replace(text, blocks, " ");
    return std::regex_replace(text, tags, " ");
}

bool is_url(std::string_view token) {
    return token.find("://") != std::string_view::npos || token.rfind("www.", 0) == 0 ||
           token.rfind("mailto:", 0) == 0;
}

bool is_path(std::string_view token) {
    if (token.size() > 1 && token[0] == '/') return true;
    if (token.rfind("~/", 0) == 0 || token.rfind("./", 0) == 0 || token.rfind("../", 0) == 0) {
        return true;
    }
    return token.size() >= 3 && std::isalpha(static_cast<unsigned char>(token[0])) &&
           token[1] == ':' && token[2] == '\\';
}

std::string_view trim_punct(std::string_view t) {
    while (!t.empty() && is_ascii_punct(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    while (!t.empty() && is_ascii_punct(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
    return t;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string clean_line(std::string_view line, const PipelineConfig& cfg) {
    std::vector<std::string> words;
    for (auto token : split_ws(line)) {
        if (is_url(token) || is_path(token)) continue;
        std::string filtered(token);
        for (auto& ch : filtered) {
            const auto c = static_cast<unsigned char>(ch);
            if (is_ascii_punct(c) && !cfg.punctuation_keep.contains(ch)) ch = ' ';
        }
        for (auto sub : split_ws(filtered)) {
            if (is_url(sub) || is_path(sub)) continue;
            const auto core = trim_punct(sub);
            if (!core.empty() && cfg.stopword_list.contains(core)) {
                // Keep sentence punctuation that trailed the dropped word.
                const auto tail = sub.substr(static_cast<std::size_t>(core.data() - sub.data()) + core.size());
                if (!tail.empty() && !words.empty()) words.back().append(tail);
                continue;
            }
            std::string word(sub);
            if (cfg.spell_correct && cfg.corrector) word = cfg.corrector(word);
            if (!word.empty()) words.push_back(std::move(word));
        }
    }
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out.push_back(' ');
        out.append(w);
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::parse_failure, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::set<std::string, std::less<>> load_stopwords(const std::filesystem::path& path) {
    std::set<std::string, std::less<>> out;
    std::istringstream in(read_file(path));
    for (std::string line; std::getline(in, line);) {
        auto word = trim(line);
        if (word.empty() || word[0] == '#') continue;
        for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.insert(std::move(word));
    }
    return out;
}

std::string normalize_text(std::string_view raw, const PipelineConfig& cfg) {
    std::string text = map_unicode(sanitize_utf8(raw));
    if (cfg.strip_html) text = strip_html(std::move(text));
    if (cfg.lowercase) {
        for (auto& c : text) {
            if (static_cast<unsigned char>(c) < 128) {
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            }
        }
    }
    for (auto& c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (c == '\n') continue;
        if (u < 0x20 || u == 0x7F) c = (c == '\t' || c == '\r' || c == '\f' || c == '\v') ? ' ' : '\x01';
    }
    std::erase(text, '\x01');

    std::string out;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        auto cleaned = clean_line(line, cfg);
        if (cleaned.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out.append(cleaned);
    }
    return out;
}

const std::set<std::string, std::less<>>& abbreviations() {
    static const std::set<std::string, std::less<>> kAbbrev{
        "u.s.",  "u.k.",  "u.n.",  "e.u.",  "e.g.",  "i.e.", "mr.",  "mrs.", "ms.",   "dr.",
        "prof.", "inc.",  "corp.", "ltd.",  "co.",   "jr.",  "sr.",  "st.",  "vs.",   "no.",
        "jan.",  "feb.",  "mar.",  "apr.",  "jun.",  "jul.", "aug.", "sep.", "sept.", "oct.",
        "nov.",  "dec.",  "approx.", "dept.", "est.", "fig.", "al.", "gen.", "gov.",  "a.m.",
        "p.m.",
    };
    return kAbbrev;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    auto flush = [&](std::string_view piece) {
        auto s = trim(piece);
        if (!s.empty()) out.push_back(std::move(s));
    };
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        auto line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        const auto line = text.substr(line_start, line_end - line_start);

        std::size_t sentence_start = 0;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            std::size_t j = i;
            while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
            if (j > i) {
                const auto token = line.substr(i, j - i);
                const char last = token.back();
                if (last == '.' || last == '?' || last == '!') {
                    std::string lower(token);
                    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                    const bool abbrev = last == '.' && abbreviations().contains(lower);
                    if (!abbrev) {
                        flush(line.substr(sentence_start, j - sentence_start));
                        sentence_start = j;
                    }
                }
            }
            i = j;
        }
        flush(line.substr(sentence_start));
        if (line_end == text.size()) break;
        line_start = line_end + 1;
    }
    return out;
}

std::string emit_jsonl(std::span<const std::string> texts) {
    std::string out;
    for (const auto& t : texts) {
        out.append(nlohmann::json{{"text", t}}.dump());
        out.push_back('\n');
    }
    return out;
}

std::string emit_jsonl(std::span<const ArticleRecord> articles) {
    std::vector<std::string> texts;
    for (const auto& a : articles) texts.push_back(a.normalized_text);
    return emit_jsonl(texts);
}

std::vector<std::string> parse_jsonl(std::string_view jsonl) {
    std::vector<std::string> out;
    std::istringstream in{std::string(jsonl)};
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).at("text").get<std::string>());
        } catch (const std::exception& e) {
            throw Error(Errc::parse_failure, "line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

Document parse_document(std::string_view text) {
    Document doc;
    static const std::regex kv("^([a-z_]+):\\s*(.*)$");
    std::vector<std::pair<std::string, std::string>> fields;
    std::size_t pos = 0;
    bool closed = false;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        if (line == "---") {
            closed = true;
            break;
        }
        std::smatch m;
        if (!std::regex_match(line, m, kv)) break;
        fields.emplace_back(m[1], trim(m[2].str()));
    }
    if (!closed || fields.empty()) {
        doc.body = std::string(text);
        return doc;
    }
    doc.body = pos < text.size() ? std::string(text.substr(pos)) : std::string();
    for (const auto& [key, value] : fields) {
        if (key == "title") doc.title = value;
        else if (key == "url" && !value.empty()) doc.url = value;
        else if (key == "published") doc.published = parse_date(value);
        else if (key == "name_tag") doc.name_tag = value;
    }
    return doc;
}

std::string slugify(std::string_view text) {
    std::string out;
    bool dash = false;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            if (dash && !out.empty()) out.push_back('-');
            out.push_back(static_cast<char>(std::tolower(c)));
            dash = false;
        } else {
            dash = true;
        }
        if (out.size() >= 64) break;
    }
    return out;
}

namespace {

ArticleRecord to_record(const Document& doc, std::string_view raw_source, const IngestOptions& opt,
                        std::string_view fallback_name, Date fallback_date) {
    ArticleRecord r;
    r.source = opt.source_label;
    r.url = doc.url;
    r.published = doc.published.value_or(fallback_date);
    r.raw_text = doc.title.empty() ? doc.body : doc.title + "\n" + doc.body;
    if (trim(r.raw_text).empty()) r.raw_text = std::string(raw_source);
    r.normalized_text = normalize_text(r.raw_text, opt.config);
    r.name_tag = !doc.name_tag.empty() ? doc.name_tag
                 : !doc.title.empty()  ? slugify(doc.title)
                                       : std::string(fallback_name);
    return r;
}

Date today() {
    return Date{std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now())};
}

Date file_date(const std::filesystem::path& p) {
    std::error_code ec;
    const auto ft = std::filesystem::last_write_time(p, ec);
    if (ec) return today();
    const auto sys = std::chrono::file_clock::to_sys(ft);
    return Date{std::chrono::floor<std::chrono::days>(sys)};
}

bool is_article_file(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    return ext == ".txt" || ext == ".html" || ext == ".htm" || ext == ".md";
}

}  // namespace

IngestResult ingest(std::span<const std::string> inputs, const IngestOptions& opt,
                    kdb::Store& store) {
    if (opt.source_label.empty()) throw Error(Errc::validation_error, "source label is required");
    IngestResult result;

    auto record_failure = [&](const std::string& input, const Error& e) {
        result.failures.push_back({input, e.code(), e.what()});
    };
    auto store_doc = [&](const std::string& input, const ArticleRecord& record) {
        try {
            result.ids.push_back(store.put_article(record));
        } catch (const Error& e) {
            record_failure(input, e);
        }
    };
    auto ingest_url = [&](const std::string& url) {
        try {
            if (!opt.fetch) throw Error(Errc::fetch_failure, "fetching disabled: " + url);
            const auto body = opt.fetcher(url);
            auto doc = parse_document(body);
            if (!doc.url) doc.url = url;
            store_doc(url, to_record(doc, body, opt, slugify(url), opt.fallback_date.value_or(today())));
        } catch (const Error& e) {
            record_failure(url, e);
        } catch (const std::exception& e) {
            record_failure(url, Error(Errc::fetch_failure, e.what()));
        }
    };
    auto ingest_file = [&](const std::filesystem::path& p) {
        try {
            const auto raw = read_file(p);
            const auto doc = parse_document(raw);
            store_doc(p.string(), to_record(doc, raw, opt, slugify(p.stem().string()), file_date(p)));
        } catch (const Error& e) {
            record_failure(p.string(), e);
        }
    };

    for (const auto& input : inputs) {
        if (input.rfind("http://", 0) == 0 || input.rfind("https://", 0) == 0) {
            ingest_url(input);
            continue;
        }
        const std::filesystem::path p(input);
        std::error_code ec;
        if (std::filesystem::is_directory(p, ec)) {
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(p)) {
                if (entry.is_regular_file() && is_article_file(entry.path())) files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) ingest_file(f);
        } else if (std::filesystem::is_regular_file(p, ec)) {
            if (opt.fetch) {
                try {
                    std::istringstream list(read_file(p));
                    for (std::string line; std::getline(list, line);) {
                        auto url = trim(line);
                        if (!url.empty() && url[0] != '#') ingest_url(url);
                    }
                } catch (const Error& e) {
                    record_failure(input, e);
                }
            } else {
                ingest_file(p);
            }
        } else {
            record_failure(input, Error(Errc::parse_failure, "no such file or directory: " + input));
        }
    }
    return result;
}

}  // namespace cesoforge::corpus
