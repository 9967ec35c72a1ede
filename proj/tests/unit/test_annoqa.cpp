#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "cesoforge/annoqa.hpp"
#include "cesoforge/errors.hpp"

using namespace cesoforge;
using namespace cesoforge::annoqa;

namespace {

const std::vector<std::vector<std::int64_t>> kTable5{
    {397, 10, 4, 24}, {13, 1722, 8, 9}, {10, 2, 926, 15}, {16, 10, 12, 21416}};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::not_found;
}

}  // namespace

TEST_CASE("reference consistency matrix") {
    const ContingencyMatrix m{default_categories(), kTable5};
    CHECK(m.total() == 24594);
    const auto r = kappa(m);
    // Hand computation: trace 397+1722+926+21416; chance term sum of row_i*col_i.
    CHECK(r.p_o == Fraction::make(24461, 24594));
    CHECK(r.p_e == Fraction::make(464639154, 604864836));
    CHECK(std::abs(r.p_e.value() - 0.768) <= 0.001);
    CHECK(r.kappa.value() >= 0.975);
    CHECK(r.kappa.value() <= 0.979);
    CHECK(r.kappa == Fraction::make(24461LL * 24594 - 464639154, 604864836LL - 464639154));
    CHECK(agreement_band(r.kappa.value()) == "almost perfect");
}

TEST_CASE("small worked matrices") {
    const auto id = kappa({{"a", "b", "c"}, {{5, 0, 0}, {0, 7, 0}, {0, 0, 1}}});
    CHECK(id.p_o == Fraction{1, 1});
    CHECK(id.kappa == Fraction{1, 1});

    const auto uniform = kappa({{"a", "b"}, {{25, 25}, {25, 25}}});
    CHECK(uniform.p_o == Fraction{1, 2});
    CHECK(uniform.p_e == Fraction{1, 2});
    CHECK(uniform.kappa == Fraction{0, 1});

    CHECK(code_of([] { kappa({{"a", "b"}, {{9, 0}, {0, 0}}}); }) == Errc::degenerate_agreement);
    CHECK(code_of([] { kappa({{"a", "b"}, {{0, 0}, {0, 0}}}); }) == Errc::precondition_violation);
}

TEST_CASE("contingency from label sequences") {
    const std::vector<std::string> a{"a", "a", "b"};
    const auto m = contingency(a, a, {"a", "b"});
    CHECK(m.counts == std::vector<std::vector<std::int64_t>>{{2, 0}, {0, 1}});
    const std::vector<std::string> x{"a", "b"};
    const std::vector<std::string> y{"b", "a"};
    CHECK(contingency(x, y, {"a", "b"}).counts == std::vector<std::vector<std::int64_t>>{{0, 1}, {1, 0}});
    CHECK(code_of([&] { contingency(x, a, {"a", "b"}); }) == Errc::length_mismatch);
    CHECK(code_of([&] { contingency(x, y, {"a"}); }) == Errc::unknown_label);
}

TEST_CASE("property: kappa is invariant under relabeling and is 1 exactly without disagreement") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t m = 2 + rng() % 4;
        ContingencyMatrix mat;
        for (std::size_t i = 0; i < m; ++i) mat.categories.push_back("c" + std::to_string(i));
        const bool diagonal = trial % 3 == 0;
        mat.counts.assign(m, std::vector<std::int64_t>(m, 0));
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (!diagonal || i == j) mat.counts[i][j] = static_cast<std::int64_t>(rng() % 50);
            }
        }
        KappaResult base;
        try {
            base = kappa(mat);
        } catch (const Error&) {
            continue;  // degenerate or empty draws
        }
        std::vector<std::size_t> perm(m);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        ContingencyMatrix p = mat;
        for (std::size_t i = 0; i < m; ++i) {
            p.categories[i] = mat.categories[perm[i]];
            for (std::size_t j = 0; j < m; ++j) p.counts[i][j] = mat.counts[perm[i]][perm[j]];
        }
        CHECK(kappa(p).kappa == base.kappa);
        bool off_diag_zero = true;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) off_diag_zero &= (i == j || mat.counts[i][j] == 0);
        }
        CHECK((base.kappa == Fraction{1, 1}) == off_diag_zero);
    }
}

TEST_CASE("token labels from annotation files reproduce the reference matrix") {
    const std::filesystem::path dir = std::filesystem::path(CESOFORGE_FIXTURE_DIR) / "kappa";
    const auto a = token_labels(slurp(dir / "annotator_a.jsonl"));
    const auto b = token_labels(slurp(dir / "annotator_b.jsonl"));
    const auto m = contingency(a, b, default_categories());
    CHECK(m.counts == kTable5);
}

TEST_CASE("token labelling") {
    const auto labels = token_labels(
        R"({"text":"qbot hits the energy sector","spans":[{"start":0,"end":4,"label":"MALWARE_NAME"},{"start":14,"end":27,"label":"Victim"}]})");
    CHECK(labels == std::vector<std::string>{"Attack", "Other", "Other", "Victim", "Victim"});
    CHECK(code_of([] { token_labels(R"({"text":"x","spans":[{"start":0,"end":1,"label":"Nope"}]})"); }) ==
          Errc::unknown_label);
}

TEST_CASE("report rounding") {
    const auto r = kappa({default_categories(), kTable5});
    const auto text = report({default_categories(), kTable5}, r);
    CHECK(text.find("p_o: 0.9946 (24461/24594)") != std::string::npos);
    CHECK(text.find("kappa: 0.9767") != std::string::npos);
}
