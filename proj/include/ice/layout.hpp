#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ice/errors.hpp"
#include "ice/vocab.hpp"

namespace ice {

enum class SectionKind { Prompt, ThinkingTemplate, ThinkingSlot, Indicator, Answer };

inline const char* to_string(SectionKind k) {
    switch (k) {
        case SectionKind::Prompt: return "prompt";
        case SectionKind::ThinkingTemplate: return "template";
        case SectionKind::ThinkingSlot: return "slot";
        case SectionKind::Indicator: return "indicator";
        case SectionKind::Answer: return "answer";
    }
    return "?";
}

/// Half-open span [begin, end) of one section. `step` is the 1-based
/// thinking-step index for template/slot sections, 0 otherwise.
struct Section {
    SectionKind kind;
    int step;
    std::size_t begin;
    std::size_t end;
};

enum class LayoutRung { Vanilla, Segment, Structured };

inline const char* to_string(LayoutRung r) {
    switch (r) {
        case LayoutRung::Vanilla: return "vanilla";
        case LayoutRung::Segment: return "segment";
        case LayoutRung::Structured: return "structured";
    }
    return "?";
}

enum class Allocation { Uniform, FrontHeavy, BackHeavy };

inline const char* to_string(Allocation a) {
    switch (a) {
        case Allocation::Uniform: return "uniform";
        case Allocation::FrontHeavy: return "front";
        case Allocation::BackHeavy: return "back";
    }
    return "?";
}

/// Structural recipe for the generation region.
struct LayoutSpec {
    int n_thinking_steps = 1;
    int total_thinking_budget = 4;
    Allocation allocation = Allocation::Uniform;
    int answer_len = 1;
    LayoutRung rung = LayoutRung::Structured;

    void validate() const {
        if (n_thinking_steps < 1) throw InvalidLayoutError("n_thinking_steps must be >= 1");
        if (answer_len < 1) throw InvalidLayoutError("answer_len must be >= 1");
        if (total_thinking_budget < n_thinking_steps) {
            throw InvalidLayoutError("thinking budget smaller than step count");
        }
        if (rung == LayoutRung::Structured && n_thinking_steps > 9) {
            throw InvalidLayoutError("structured layouts support at most 9 step templates");
        }
    }
};

/// A token sequence under refinement: tokens, mask flags and the section
/// map. masked[i] != 0 iff tokens[i] is the MASK token.
struct SequenceState {
    std::vector<TokenId> tokens;
    std::vector<std::uint8_t> masked;
    std::vector<Section> sections;
    int step_index = 0;

    std::size_t size() const { return tokens.size(); }
    bool is_masked(std::size_t i) const { return masked[i] != 0; }

    std::size_t masked_count() const {
        return static_cast<std::size_t>(std::count(masked.begin(), masked.end(), std::uint8_t{1}));
    }

    void write_token(std::size_t i, TokenId t) {
        tokens[i] = t;
        masked[i] = 0;
    }

    const Section& section_of(std::size_t pos) const {
        for (const Section& s : sections) {
            if (pos >= s.begin && pos < s.end) return s;
        }
        throw InvalidInputError("position outside all sections");
    }
};

/// Split `total` masked slots over `n_steps` thinking steps.
/// Uniform splits as equally as possible with earlier steps absorbing the
/// remainder; FrontHeavy weights step i by (n-i+1), BackHeavy by i. Shares
/// are rounded by largest remainder with ties to the lower index, then any
/// zero entries are topped up from the largest entry so every step keeps at
/// least one slot.
inline std::vector<int> allocate_masks(Allocation strategy, int n_steps, int total) {
    if (n_steps < 1) throw InvalidBudgetError("n_steps must be >= 1");
    if (total < n_steps) throw InvalidBudgetError("budget must cover one slot per step");

    std::vector<double> weights(static_cast<std::size_t>(n_steps));
    for (int i = 0; i < n_steps; ++i) {
        switch (strategy) {
            case Allocation::Uniform: weights[i] = 1.0; break;
            case Allocation::FrontHeavy: weights[i] = static_cast<double>(n_steps - i); break;
            case Allocation::BackHeavy: weights[i] = static_cast<double>(i + 1); break;
        }
    }
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);

    std::vector<int> out(static_cast<std::size_t>(n_steps));
    std::vector<double> frac(static_cast<std::size_t>(n_steps));
    int assigned = 0;
    for (int i = 0; i < n_steps; ++i) {
        const double share = total * weights[i] / wsum;
        out[i] = static_cast<int>(share);
        frac[i] = share - out[i];
        assigned += out[i];
    }
    for (int left = total - assigned; left > 0; --left) {
        int best = 0;
        for (int i = 1; i < n_steps; ++i) {
            if (frac[i] > frac[best]) best = i;  // tie keeps the lower index
        }
        ++out[best];
        frac[best] = -1.0;
    }

    // Largest-remainder rounding can starve an extreme step; repay from the
    // largest entry nearest the starved end so monotonicity is preserved.
    while (true) {
        auto zero = std::find(out.begin(), out.end(), 0);
        if (zero == out.end()) break;
        int donor = 0;
        if (strategy == Allocation::BackHeavy) {
            for (int i = 1; i < n_steps; ++i) {
                if (out[i] > out[donor]) donor = i;  // leftmost max
            }
        } else {
            for (int i = 0; i < n_steps; ++i) {
                if (out[i] >= out[donor]) donor = i;  // rightmost max
            }
        }
        --out[donor];
        *zero = 1;
    }
    return out;
}

/// Build the initial refinement state y^(N) for a prompt and layout spec.
///
/// Structured: prompt | per step i: [STEP, digit(i)] template + masked slots
/// | ANS indicator | masked answer. Segment drops the templates and keeps a
/// single undivided thinking span. Vanilla is prompt + one undivided masked
/// span of budget+answer_len with no indicator.
inline SequenceState build_layout(const Vocabulary& vocab,
                                  const std::vector<TokenId>& prompt_tokens,
                                  const LayoutSpec& spec) {
    spec.validate();
    if (prompt_tokens.empty()) throw InvalidInputError("prompt must be non-empty");
    for (TokenId t : prompt_tokens) {
        if (t == vocab.mask_token()) throw InvalidInputError("prompt must be MASK-free");
        if (t < 0 || t >= vocab.size()) throw InvalidInputError("prompt token outside vocabulary");
    }

    SequenceState st;
    auto append_unmasked = [&](TokenId t) {
        st.tokens.push_back(t);
        st.masked.push_back(0);
    };
    auto append_masked_run = [&](int n) {
        for (int i = 0; i < n; ++i) {
            st.tokens.push_back(vocab.mask_token());
            st.masked.push_back(1);
        }
    };

    for (TokenId t : prompt_tokens) append_unmasked(t);
    st.sections.push_back({SectionKind::Prompt, 0, 0, st.size()});

    if (spec.rung == LayoutRung::Vanilla) {
        const std::size_t begin = st.size();
        append_masked_run(spec.total_thinking_budget + spec.answer_len);
        st.sections.push_back({SectionKind::ThinkingSlot, 1, begin, st.size()});
        return st;
    }

    if (spec.rung == LayoutRung::Segment) {
        const std::size_t begin = st.size();
        append_masked_run(spec.total_thinking_budget);
        st.sections.push_back({SectionKind::ThinkingSlot, 1, begin, st.size()});
    } else {
        const auto budgets = allocate_masks(spec.allocation, spec.n_thinking_steps,
                                            spec.total_thinking_budget);
        for (int i = 0; i < spec.n_thinking_steps; ++i) {
            std::size_t begin = st.size();
            append_unmasked(vocab.step_token());
            append_unmasked(vocab.digit(i + 1));
            st.sections.push_back({SectionKind::ThinkingTemplate, i + 1, begin, st.size()});
            begin = st.size();
            append_masked_run(budgets[static_cast<std::size_t>(i)]);
            st.sections.push_back({SectionKind::ThinkingSlot, i + 1, begin, st.size()});
        }
    }

    std::size_t begin = st.size();
    append_unmasked(vocab.ans_token());
    st.sections.push_back({SectionKind::Indicator, 0, begin, st.size()});

    begin = st.size();
    append_masked_run(spec.answer_len);
    st.sections.push_back({SectionKind::Answer, 0, begin, st.size()});
    return st;
}

inline std::vector<std::size_t> section_positions(const SequenceState& state, SectionKind kind) {
    std::vector<std::size_t> out;
    for (const Section& s : state.sections) {
        if (s.kind != kind) continue;
        for (std::size_t i = s.begin; i < s.end; ++i) out.push_back(i);
    }
    return out;
}

inline std::vector<std::size_t> masked_positions(const SequenceState& state) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state.is_masked(i)) out.push_back(i);
    }
    return out;
}

inline std::vector<std::size_t> masked_positions_in(const SequenceState& state, SectionKind kind) {
    std::vector<std::size_t> out;
    for (const Section& s : state.sections) {
        if (s.kind != kind) continue;
        for (std::size_t i = s.begin; i < s.end; ++i) {
            if (state.is_masked(i)) out.push_back(i);
        }
    }
    return out;
}

inline bool has_section(const SequenceState& state, SectionKind kind) {
    for (const Section& s : state.sections) {
        if (s.kind == kind) return true;
    }
    return false;
}

/// Recover the layout rung from a state's section map.
inline LayoutRung layout_rung_of(const SequenceState& state) {
    if (has_section(state, SectionKind::ThinkingTemplate)) return LayoutRung::Structured;
    if (has_section(state, SectionKind::Indicator)) return LayoutRung::Segment;
    return LayoutRung::Vanilla;
}

} // namespace ice
