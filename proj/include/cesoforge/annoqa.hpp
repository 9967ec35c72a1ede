#pragma once

// Inter-annotator agreement: contingency matrices and Cohen's kappa in exact
// rational arithmetic.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cesoforge::annoqa {

/// Reduced fraction with a positive denominator. Arithmetic is overflow
/// checked and throws PreconditionViolation rather than wrapping.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Fraction make(std::int64_t num, std::int64_t den);
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;  // "24461/24594"

    bool operator==(const Fraction&) const = default;
};

struct ContingencyMatrix {
    std::vector<std::string> categories;
    std::vector<std::vector<std::int64_t>> counts;  // rows: annotator A

    std::int64_t total() const;
    /// Throws PreconditionViolation unless square, sized to the categories and
    /// non-negative.
    void check() const;
};

/// The four annotation classes in report order.
const std::vector<std::string>& default_categories();

/// Throws LengthMismatch or UnknownLabel.
ContingencyMatrix contingency(std::span<const std::string> a, std::span<const std::string> b,
                              const std::vector<std::string>& categories);

struct KappaResult {
    Fraction p_o;
    Fraction p_e;
    Fraction kappa;
};

/// Throws DegenerateAgreement when p_e = 1 and PreconditionViolation when N = 0.
KappaResult kappa(const ContingencyMatrix& matrix);

/// Landis-Koch style reading of a kappa value.
std::string_view agreement_band(double kappa);

/// Per-token class labels from an external-annotation JSONL document. Tokens
/// are whitespace-separated; a token takes the class (group) of the first span
/// overlapping it, else "Other". Span labels may be tag categories or class
/// names. Throws ParseFailure, BadSpan or UnknownLabel.
std::vector<std::string> token_labels(std::string_view jsonl);

/// Plain-text summary with values rounded to 4 decimals.
std::string report(const ContingencyMatrix& matrix, const KappaResult& result);

}  // namespace cesoforge::annoqa
