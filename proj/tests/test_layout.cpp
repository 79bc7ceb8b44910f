#include <doctest.h>

#include <numeric>

#include "ice/layout.hpp"
#include "ice/rng.hpp"
#include "ice/vocab.hpp"

using namespace ice;

namespace {

std::vector<TokenId> example_prompt(const Vocabulary& v) {
    // a = 3 ; b ?
    return {v.var(0), v.eq_token(), v.digit(3), v.semi_token(), v.var(1), v.query_token()};
}

} // namespace

TEST_CASE("builtin vocabulary has 24 dense tokens with unique roles") {
    const auto& v = Vocabulary::builtin();
    CHECK(v.size() == 24);
    // dense ids: every id below size() resolves to a distinct symbol
    std::vector<std::string> seen;
    for (TokenId t = 0; t < v.size(); ++t) seen.push_back(v.symbol(t));
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    // exactly one mask token
    int masks = 0;
    for (TokenId t = 0; t < v.size(); ++t) masks += (t == v.mask_token()) ? 1 : 0;
    CHECK(masks == 1);
    CHECK(v.digit_value(v.digit(7)) == 7);
    CHECK(v.symbol(v.digit(0)) == "0");
    CHECK(v.n_vars() == 4);
}

TEST_CASE("allocate_masks splits budgets per strategy") {
    CHECK(allocate_masks(Allocation::Uniform, 3, 12) == std::vector<int>{4, 4, 4});
    CHECK(allocate_masks(Allocation::FrontHeavy, 3, 12) == std::vector<int>{6, 4, 2});
    CHECK(allocate_masks(Allocation::BackHeavy, 3, 12) == std::vector<int>{2, 4, 6});
    // earlier steps absorb the uniform remainder
    CHECK(allocate_masks(Allocation::Uniform, 3, 13) == std::vector<int>{5, 4, 4});
    CHECK_THROWS_AS(allocate_masks(Allocation::Uniform, 3, 2), InvalidBudgetError);
    CHECK_THROWS_AS(allocate_masks(Allocation::Uniform, 0, 2), InvalidBudgetError);
}

TEST_CASE("allocate_masks invariants over random inputs") {
    Rng rng(42);
    for (int iter = 0; iter < 300; ++iter) {
        const int n = 1 + static_cast<int>(rng.next_below(8));
        const int total = n + static_cast<int>(rng.next_below(30));
        for (Allocation a : {Allocation::Uniform, Allocation::FrontHeavy, Allocation::BackHeavy}) {
            const auto b = allocate_masks(a, n, total);
            CHECK(std::accumulate(b.begin(), b.end(), 0) == total);
            for (int x : b) CHECK(x >= 1);
            if (a == Allocation::Uniform) {
                const auto [mn, mx] = std::minmax_element(b.begin(), b.end());
                CHECK(*mx - *mn <= 1);
            }
            if (a == Allocation::FrontHeavy) {
                CHECK(std::is_sorted(b.rbegin(), b.rend()));
            }
            if (a == Allocation::BackHeavy) {
                CHECK(std::is_sorted(b.begin(), b.end()));
            }
        }
    }
}

TEST_CASE("build_layout structured example") {
    const auto& v = Vocabulary::builtin();
    LayoutSpec spec;
    spec.n_thinking_steps = 1;
    spec.total_thinking_budget = 4;
    spec.allocation = Allocation::Uniform;
    spec.answer_len = 1;
    spec.rung = LayoutRung::Structured;

    const auto st = build_layout(v, example_prompt(v), spec);
    CHECK(st.size() == 14);  // 6 prompt + 2 template + 4 slots + 1 indicator + 1 answer
    CHECK(st.masked_count() == 5);
    // prompt, template and indicator stay unmasked
    for (std::size_t i : section_positions(st, SectionKind::Prompt)) CHECK_FALSE(st.is_masked(i));
    for (std::size_t i : section_positions(st, SectionKind::ThinkingTemplate)) CHECK_FALSE(st.is_masked(i));
    for (std::size_t i : section_positions(st, SectionKind::Indicator)) CHECK_FALSE(st.is_masked(i));
    for (std::size_t i : section_positions(st, SectionKind::ThinkingSlot)) CHECK(st.is_masked(i));
    for (std::size_t i : section_positions(st, SectionKind::Answer)) CHECK(st.is_masked(i));
    // masked iff MASK token
    for (std::size_t i = 0; i < st.size(); ++i) {
        CHECK(st.is_masked(i) == (st.tokens[i] == v.mask_token()));
    }
    // template content [STEP, digit(1)]
    const auto tpl = section_positions(st, SectionKind::ThinkingTemplate);
    REQUIRE(tpl.size() == 2);
    CHECK(st.tokens[tpl[0]] == v.step_token());
    CHECK(st.tokens[tpl[1]] == v.digit(1));
    CHECK(section_positions(st, SectionKind::Answer) == std::vector<std::size_t>{13});
    CHECK(section_positions(st, SectionKind::Prompt) ==
          std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("build_layout vanilla example") {
    const auto& v = Vocabulary::builtin();
    LayoutSpec spec;
    spec.n_thinking_steps = 1;
    spec.total_thinking_budget = 4;
    spec.answer_len = 1;
    spec.rung = LayoutRung::Vanilla;

    const auto st = build_layout(v, example_prompt(v), spec);
    CHECK(st.size() == 11);
    CHECK(st.masked_count() == 5);
    CHECK(section_positions(st, SectionKind::Indicator).empty());
    CHECK(section_positions(st, SectionKind::Answer).empty());
    for (TokenId t : st.tokens) {
        CHECK(t != v.step_token());
        CHECK(t != v.ans_token());
    }
    CHECK(layout_rung_of(st) == LayoutRung::Vanilla);
}

TEST_CASE("build_layout rejects bad input") {
    const auto& v = Vocabulary::builtin();
    LayoutSpec spec;
    spec.n_thinking_steps = 3;
    spec.total_thinking_budget = 2;  // budget < N_t
    CHECK_THROWS_AS(build_layout(v, example_prompt(v), spec), InvalidLayoutError);

    LayoutSpec ok;
    auto prompt = example_prompt(v);
    prompt.push_back(v.mask_token());
    CHECK_THROWS_AS(build_layout(v, prompt, ok), InvalidInputError);
    CHECK_THROWS_AS(build_layout(v, {}, ok), InvalidInputError);
}

TEST_CASE("build_layout sections partition the sequence and runs are deterministic") {
    const auto& v = Vocabulary::builtin();
    Rng rng(7);
    for (int iter = 0; iter < 100; ++iter) {
        LayoutSpec spec;
        spec.n_thinking_steps = 1 + static_cast<int>(rng.next_below(5));
        spec.total_thinking_budget =
            spec.n_thinking_steps + static_cast<int>(rng.next_below(16));
        spec.allocation = static_cast<Allocation>(rng.next_below(3));
        spec.answer_len = 1 + static_cast<int>(rng.next_below(4));
        spec.rung = static_cast<LayoutRung>(rng.next_below(3));

        const auto st = build_layout(v, example_prompt(v), spec);
        // exhaustive and disjoint: sections tile [0, L) in order
        std::size_t cursor = 0;
        for (const Section& s : st.sections) {
            CHECK(s.begin == cursor);
            CHECK(s.end >= s.begin);
            cursor = s.end;
        }
        CHECK(cursor == st.size());

        const auto again = build_layout(v, example_prompt(v), spec);
        CHECK(again.tokens == st.tokens);
        CHECK(again.masked == st.masked);
    }
}

TEST_CASE("section_positions on missing kinds returns empty") {
    const auto& v = Vocabulary::builtin();
    LayoutSpec spec;
    spec.rung = LayoutRung::Vanilla;
    const auto st = build_layout(v, example_prompt(v), spec);
    CHECK(section_positions(st, SectionKind::Indicator).empty());
    CHECK(masked_positions_in(st, SectionKind::Answer).empty());
}
