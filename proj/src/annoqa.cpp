#include "cesoforge/annoqa.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cesoforge/errors.hpp"
#include "cesoforge/tags.hpp"

namespace cesoforge::annoqa {

namespace {

std::int64_t mul(std::int64_t a, std::int64_t b) {
    std::int64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r)) {
        throw Error(Errc::precondition_violation, "integer overflow in agreement arithmetic");
    }
    return r;
}

std::int64_t add(std::int64_t a, std::int64_t b) {
    std::int64_t r = 0;
    if (__builtin_add_overflow(a, b, &r)) {
        throw Error(Errc::precondition_violation, "integer overflow in agreement arithmetic");
    }
    return r;
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

Fraction Fraction::make(std::int64_t num, std::int64_t den) {
    if (den == 0) throw Error(Errc::precondition_violation, "zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const auto g = std::gcd(num < 0 ? -num : num, den);
    return g > 1 ? Fraction{num / g, den / g} : Fraction{num, den};
}

std::string Fraction::str() const { return std::to_string(num) + "/" + std::to_string(den); }

std::int64_t ContingencyMatrix::total() const {
    std::int64_t n = 0;
    for (const auto& row : counts) {
        for (auto c : row) n = add(n, c);
    }
    return n;
}

void ContingencyMatrix::check() const {
    const auto m = categories.size();
    if (m == 0 || counts.size() != m) {
        throw Error(Errc::precondition_violation, "contingency matrix must be square over its categories");
    }
    for (const auto& row : counts) {
        if (row.size() != m) throw Error(Errc::precondition_violation, "contingency matrix must be square");
        for (auto c : row) {
            if (c < 0) throw Error(Errc::precondition_violation, "negative cell count");
        }
    }
}

const std::vector<std::string>& default_categories() {
    static const std::vector<std::string> cats{"Attacker", "Attack", "Victim", "Other"};
    return cats;
}

ContingencyMatrix contingency(std::span<const std::string> a, std::span<const std::string> b,
                              const std::vector<std::string>& categories) {
    if (a.size() != b.size()) {
        throw Error(Errc::length_mismatch, "annotations cover " + std::to_string(a.size()) + " vs " +
                                               std::to_string(b.size()) + " terms");
    }
    ContingencyMatrix m;
    m.categories = categories;
    m.counts.assign(categories.size(), std::vector<std::int64_t>(categories.size(), 0));
    auto index = [&](const std::string& label) {
        const auto it = std::find(categories.begin(), categories.end(), label);
        if (it == categories.end()) throw Error(Errc::unknown_label, "label not in category list: " + label);
        return static_cast<std::size_t>(it - categories.begin());
    };
    for (std::size_t k = 0; k < a.size(); ++k) ++m.counts[index(a[k])][index(b[k])];
    return m;
}

KappaResult kappa(const ContingencyMatrix& m) {
    m.check();
    const auto n = m.total();
    if (n == 0) throw Error(Errc::precondition_violation, "no annotated terms");
    const auto size = m.categories.size();
    std::int64_t trace = 0;
    std::int64_t chance = 0;  // sum of row_i * col_i
    for (std::size_t i = 0; i < size; ++i) {
        trace = add(trace, m.counts[i][i]);
        std::int64_t row = 0;
        std::int64_t col = 0;
        for (std::size_t j = 0; j < size; ++j) {
            row = add(row, m.counts[i][j]);
            col = add(col, m.counts[j][i]);
        }
        chance = add(chance, mul(row, col));
    }
    const auto n2 = mul(n, n);
    if (chance == n2) {
        throw Error(Errc::degenerate_agreement,
                    "expected agreement is 1 (both annotators used a single category); kappa undefined");
    }
    KappaResult r;
    r.p_o = Fraction::make(trace, n);
    r.p_e = Fraction::make(chance, n2);
    r.kappa = Fraction::make(add(mul(trace, n), -chance), add(n2, -chance));
    return r;
}

std::string_view agreement_band(double k) {
    if (k < 0.0) return "poor";
    if (k <= 0.20) return "slight";
    if (k <= 0.40) return "fair";
    if (k <= 0.60) return "moderate";
    if (k <= 0.80) return "substantial";
    return "almost perfect";
}

std::vector<std::string> token_labels(std::string_view jsonl) {
    std::vector<std::string> out;
    std::istringstream in{std::string(jsonl)};
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = "line " + std::to_string(lineno) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse_failure, where + e.what());
        }
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
            throw Error(Errc::parse_failure, where + "missing text");
        }
        const auto text = j["text"].get<std::string>();
        struct Span {
            std::size_t start, end;
            std::string group;
        };
        std::vector<Span> spans;
        for (const auto& s : j.value("spans", nlohmann::json::array())) {
            if (!s.is_object() || !s.contains("start") || !s.contains("end") || !s.contains("label") ||
                !s["start"].is_number_integer() || !s["end"].is_number_integer() || !s["label"].is_string()) {
                throw Error(Errc::parse_failure, where + "span needs integer start/end and a label");
            }
            const auto label = s["label"].get<std::string>();
            std::string group;
            if (auto c = parse_category(label)) {
                group = std::string(to_string(group_of(*c)));
            } else if (auto g = parse_group(label)) {
                group = std::string(to_string(*g));
            } else {
                throw Error(Errc::unknown_label, where + "unknown label " + label);
            }
            const auto start = s["start"].get<long long>();
            const auto end = s["end"].get<long long>();
            if (start < 0 || end <= start || static_cast<std::size_t>(end) > text.size()) {
                throw Error(Errc::bad_span, where + "span outside text");
            }
            spans.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end), group});
        }
        std::stable_sort(spans.begin(), spans.end(), [](const Span& x, const Span& y) { return x.start < y.start; });

        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            const auto start = i;
            while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            if (i == start) break;
            std::string label = "Other";
            for (const auto& s : spans) {
                if (s.start < i && start < s.end) {
                    label = s.group;
                    break;
                }
            }
            out.push_back(std::move(label));
        }
    }
    return out;
}

std::string report(const ContingencyMatrix& m, const KappaResult& r) {
    std::ostringstream out;
    out << "terms: " << m.total() << "\n";
    out << "categories: ";
    for (std::size_t i = 0; i < m.categories.size(); ++i) out << (i ? ", " : "") << m.categories[i];
    out << "\n";
    for (std::size_t i = 0; i < m.counts.size(); ++i) {
        out << "  " << m.categories[i] << ":";
        for (auto c : m.counts[i]) out << " " << c;
        out << "\n";
    }
    out << "p_o: " << fixed4(r.p_o.value()) << " (" << r.p_o.str() << ")\n";
    out << "p_e: " << fixed4(r.p_e.value()) << " (" << r.p_e.str() << ")\n";
    out << "kappa: " << fixed4(r.kappa.value()) << "\n";
    out << "agreement: " << agreement_band(r.kappa.value()) << "\n";
    return out.str();
}

}  // namespace cesoforge::annoqa
