#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ice/chain_task.hpp"
#include "ice/errors.hpp"
#include "ice/layout.hpp"
#include "ice/predictor.hpp"

namespace ice {

/// One hypothesis: a full clean token sequence and its prior weight.
struct Candidate {
    std::vector<TokenId> tokens;
    double weight;
};

/// Enumerated weighted hypothesis space of the oracle predictor. Every
/// candidate shares the layout length and all prompt/template/indicator
/// tokens; conditioning on unmasked positions filters it monotonically.
struct CandidateSet {
    std::vector<Candidate> candidates;
    double eps = 0.0;

    std::size_t sequence_length() const {
        return candidates.empty() ? 0 : candidates.front().tokens.size();
    }
};

struct CandidateOptions {
    /// When set, vanilla-rung candidates additionally vary where the content
    /// block sits inside the generation span (PAD before vs. after), giving
    /// the oracle genuine formatting ambiguity.
    bool pad_variants = false;
    int max_extra_offsets = 2;
};

namespace detail {

// Per-step result digits for one error vector. Step i holds the chain value
// computed from the candidate's own previous result, nudged by delta_i, so
// errors compound downstream exactly like a sloppy worked solution would.
inline std::vector<int> candidate_results(const ChainArithTask& task, const std::vector<int>& deltas) {
    std::vector<int> r;
    r.reserve(static_cast<std::size_t>(task.m));
    r.push_back(task.first_value);
    for (int i = 1; i < task.m; ++i) {
        int base = ChainArithTask::apply_op(r.back(), task.steps[static_cast<std::size_t>(i - 1)].op,
                                            task.steps[static_cast<std::size_t>(i - 1)].operand);
        r.push_back(((base + deltas[static_cast<std::size_t>(i - 1)]) % 10 + 10) % 10);
    }
    return r;
}

inline std::vector<TokenId> assignment_group(const Vocabulary& vocab, int step_index, int result) {
    return {task_var_token(vocab, step_index), vocab.eq_token(), vocab.digit(result), vocab.semi_token()};
}

} // namespace detail

/// Enumerate the 3^(m-1) candidates for a task under a layout. Each
/// computed step carries the chained value or that value +-1 mod 10 with
/// weights (1-eps), eps/2, eps/2 multiplied along the chain; zero-weight
/// branches are dropped, so eps=0 yields the single canonical candidate.
inline CandidateSet enumerate_candidates(const ChainArithTask& task, const LayoutSpec& spec,
                                         double eps, const Vocabulary& vocab,
                                         const CandidateOptions& opts = {}) {
    task.validate();
    spec.validate();
    if (eps < 0.0 || eps >= 0.5) throw InvalidInputError("eps must lie in [0, 0.5)");

    const auto prompt = encode_prompt(task, vocab);
    const SequenceState base = build_layout(vocab, prompt, spec);
    const int n_groups = task.m - 1;

    // Geometry checks before any enumeration work.
    std::vector<Section> slots;
    for (const Section& s : base.sections) {
        if (s.kind == SectionKind::ThinkingSlot) slots.push_back(s);
    }
    if (spec.rung == LayoutRung::Structured) {
        if (spec.n_thinking_steps < n_groups) {
            throw LayoutIncompatibleError("task needs " + std::to_string(n_groups) +
                                          " thinking steps, layout has " +
                                          std::to_string(spec.n_thinking_steps));
        }
        for (int i = 0; i < n_groups; ++i) {
            const Section& s = slots[static_cast<std::size_t>(i)];
            if (s.end - s.begin < 4) {
                throw LayoutIncompatibleError("thinking step budget below 4 tokens");
            }
        }
    } else {
        const Section& span = slots.front();
        const std::size_t need = static_cast<std::size_t>(4 * n_groups) +
                                 (spec.rung == LayoutRung::Vanilla ? 1u : 0u);
        if (span.end - span.begin < need) {
            throw LayoutIncompatibleError("generation span too small for the task");
        }
    }

    const double w_keep = 1.0 - eps;
    const double w_err = eps / 2.0;

    CandidateSet set;
    set.eps = eps;

    std::vector<int> deltas(static_cast<std::size_t>(n_groups), 0);

    auto emit = [&](double weight) {
        const auto results = detail::candidate_results(task, deltas);

        std::vector<TokenId> content;  // assignment groups, contiguous
        for (int i = 1; i < task.m; ++i) {
            const auto group = detail::assignment_group(vocab, i, results[static_cast<std::size_t>(i)]);
            content.insert(content.end(), group.begin(), group.end());
        }
        const TokenId answer_digit = vocab.digit(results.back());

        if (spec.rung == LayoutRung::Structured) {
            Candidate cand{base.tokens, weight};
            for (std::size_t s = 0; s < slots.size(); ++s) {
                const Section& slot = slots[s];
                std::vector<TokenId> fill;
                if (static_cast<int>(s) < n_groups) {
                    fill = detail::assignment_group(vocab, static_cast<int>(s) + 1,
                                                    results[s + 1]);
                }
                for (std::size_t i = slot.begin; i < slot.end; ++i) {
                    const std::size_t off = i - slot.begin;
                    cand.tokens[i] = off < fill.size() ? fill[off] : vocab.pad_token();
                }
            }
            const auto answer = section_positions(base, SectionKind::Answer);
            for (std::size_t i = 0; i < answer.size(); ++i) {
                cand.tokens[answer[i]] = i == 0 ? answer_digit : vocab.pad_token();
            }
            set.candidates.push_back(std::move(cand));
            return;
        }

        if (spec.rung == LayoutRung::Segment) {
            Candidate cand{base.tokens, weight};
            const Section& span = slots.front();
            for (std::size_t i = span.begin; i < span.end; ++i) {
                const std::size_t off = i - span.begin;
                cand.tokens[i] = off < content.size() ? content[off] : vocab.pad_token();
            }
            const auto answer = section_positions(base, SectionKind::Answer);
            for (std::size_t i = 0; i < answer.size(); ++i) {
                cand.tokens[answer[i]] = i == 0 ? answer_digit : vocab.pad_token();
            }
            set.candidates.push_back(std::move(cand));
            return;
        }

        // Vanilla: groups then the answer digit inside the undivided span,
        // optionally shifted right by a few PADs.
        content.push_back(answer_digit);
        const Section& span = slots.front();
        const std::size_t room = (span.end - span.begin) - content.size();
        const std::size_t n_offsets =
            opts.pad_variants ? std::min<std::size_t>(room, static_cast<std::size_t>(opts.max_extra_offsets)) + 1
                              : 1;
        for (std::size_t shift = 0; shift < n_offsets; ++shift) {
            Candidate cand{base.tokens, weight / static_cast<double>(n_offsets)};
            for (std::size_t i = span.begin; i < span.end; ++i) {
                const std::size_t off = i - span.begin;
                cand.tokens[i] = (off >= shift && off - shift < content.size())
                                     ? content[off - shift]
                                     : vocab.pad_token();
            }
            set.candidates.push_back(std::move(cand));
        }
    };

    // Depth-first over error vectors; delta order (0, +1, -1) per step keeps
    // enumeration deterministic with the canonical candidate first.
    auto walk = [&](auto&& self, int depth, double weight) -> void {
        if (weight == 0.0) return;
        if (depth == n_groups) {
            emit(weight);
            return;
        }
        for (int d : {0, 1, -1}) {
            deltas[static_cast<std::size_t>(depth)] = d;
            self(self, depth + 1, weight * (d == 0 ? w_keep : w_err));
        }
        deltas[static_cast<std::size_t>(depth)] = 0;
    };
    walk(walk, 0, 1.0);
    return set;
}

/// Exact posterior marginals: P(token v at i) proportional to the summed
/// weight of candidates that agree with every unmasked position of `state`
/// and carry v at i. Throws when no candidate survives the conditioning,
/// which signals that a decoder wrote a token outside the support.
inline PredictorOutput oracle_conditional(const CandidateSet& set, const SequenceState& state,
                                          std::size_t vocab_size) {
    const std::size_t len = state.size();
    if (set.candidates.empty() || set.sequence_length() != len) {
        throw ShapeError("state length does not match the oracle's candidates");
    }

    PredictorOutput out(len, vocab_size);
    double total = 0.0;
    for (const Candidate& cand : set.candidates) {
        bool consistent = true;
        for (std::size_t i = 0; i < len; ++i) {
            if (!state.is_masked(i) && cand.tokens[i] != state.tokens[i]) {
                consistent = false;
                break;
            }
        }
        if (!consistent) continue;
        total += cand.weight;
        for (std::size_t i = 0; i < len; ++i) {
            out.row(i)[static_cast<std::size_t>(cand.tokens[i])] += cand.weight;
        }
    }
    if (total <= 0.0) {
        throw InconsistentStateError("no candidate is consistent with the decoded state");
    }
    const double inv = 1.0 / total;
    for (std::size_t i = 0; i < len; ++i) {
        for (double& p : out.row(i)) p *= inv;
    }
    return out;
}

/// Brute-force Bayesian predictor over an enumerated candidate set.
class OraclePredictor final : public Predictor {
public:
    OraclePredictor(CandidateSet set, std::size_t vocab_size)
        : set_(std::move(set)), vocab_(vocab_size) {
        if (set_.candidates.empty()) throw InvalidInputError("oracle needs at least one candidate");
    }

    PredictorOutput predict(const SequenceState& state) const override {
        return oracle_conditional(set_, state, vocab_);
    }

    const CandidateSet& candidates() const { return set_; }

    std::size_t consistent_count(const SequenceState& state) const {
        std::size_t n = 0;
        for (const Candidate& cand : set_.candidates) {
            bool ok = true;
            for (std::size_t i = 0; i < state.size() && ok; ++i) {
                ok = state.is_masked(i) || cand.tokens[i] == state.tokens[i];
            }
            n += ok ? 1 : 0;
        }
        return n;
    }

private:
    CandidateSet set_;
    std::size_t vocab_;
};

} // namespace ice
