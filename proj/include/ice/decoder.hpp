#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ice/errors.hpp"
#include "ice/layout.hpp"
#include "ice/predictor.hpp"
#include "ice/rng.hpp"
#include "ice/trace.hpp"

namespace ice {

enum class StrategyKind { ConfidenceTopK, StochasticK };

inline const char* to_string(StrategyKind k) {
    return k == StrategyKind::ConfidenceTopK ? "topk" : "stochastic";
}

/// Default tokens-per-step schedule: spread the remaining masked positions
/// evenly over the remaining steps. With N equal to the masked count this
/// unmasks exactly one token per step.
inline int default_k_sched(int remaining, int steps_remaining) {
    if (steps_remaining < 1) steps_remaining = 1;
    return (remaining + steps_remaining - 1) / steps_remaining;
}

/// Speed-prioritized schedule: pretend only half the steps are left.
inline int aggressive_k_sched(int remaining, int steps_remaining) {
    return default_k_sched(remaining, std::max(1, steps_remaining / 2));
}

struct UnmaskingStrategy {
    StrategyKind kind = StrategyKind::ConfidenceTopK;
    std::function<int(int remaining, int steps_remaining)> k_sched;  // empty -> default

    int schedule(int remaining, int steps_remaining) const {
        const int k = k_sched ? k_sched(remaining, steps_remaining)
                              : default_k_sched(remaining, steps_remaining);
        return std::max(1, k);
    }
};

enum class DecodeRung { Vanilla, Segment, Structured, Ice };

inline const char* to_string(DecodeRung r) {
    switch (r) {
        case DecodeRung::Vanilla: return "vanilla";
        case DecodeRung::Segment: return "segment";
        case DecodeRung::Structured: return "structured";
        case DecodeRung::Ice: return "ice";
    }
    return "?";
}

inline LayoutRung layout_rung_for(DecodeRung r) {
    switch (r) {
        case DecodeRung::Vanilla: return LayoutRung::Vanilla;
        case DecodeRung::Segment: return LayoutRung::Segment;
        case DecodeRung::Structured:
        case DecodeRung::Ice: return LayoutRung::Structured;
    }
    return LayoutRung::Structured;
}

struct DecodeConfig {
    int total_steps = 0;  // 0 -> one step per initially masked position
    UnmaskingStrategy strategy;
    std::uint64_t rng_seed = 0;
    DecodeRung rung = DecodeRung::Structured;
    std::optional<double> tau;  // confidence threshold; >1 means never exit

    void validate() const {
        if (total_steps < 0) throw PreconditionError("total_steps must be >= 0");
        if (rung == DecodeRung::Ice && !tau) {
            throw PreconditionError("ice decoding requires a confidence threshold");
        }
        if (rung != DecodeRung::Ice && tau) {
            throw PreconditionError("tau is only meaningful for ice decoding");
        }
        if (tau && *tau <= 0.0) throw PreconditionError("tau must be positive");
    }
};

/// Per-position argmax of the predicted distributions; ties resolve to the
/// lowest vocabulary index.
inline std::vector<TokenId> greedy_estimate(const PredictorOutput& output) {
    std::vector<TokenId> est(output.length());
    for (std::size_t i = 0; i < output.length(); ++i) {
        const auto row = output.row(i);
        std::size_t best = 0;
        for (std::size_t v = 1; v < row.size(); ++v) {
            if (row[v] > row[best]) best = v;
        }
        est[i] = static_cast<TokenId>(best);
    }
    return est;
}

/// Confidence of position i: the largest probability in its distribution.
inline double token_confidence(const PredictorOutput& output, std::size_t i) {
    const auto row = output.row(i);
    double best = 0.0;
    for (double p : row) best = std::max(best, p);
    return best;
}

struct TransitionResult {
    SequenceState state;
    std::vector<std::size_t> unmasked;  // ascending
};

/// Transition function S: reveal min(k_sched(remaining, k), remaining) of
/// the target positions with the estimate's tokens. ConfidenceTopK picks the
/// highest-confidence targets (ties to the lower position); StochasticK
/// samples uniformly without replacement. Positions outside the target set
/// are never touched and nothing is ever re-masked. An empty target set is
/// a no-op.
inline TransitionResult transition(const SequenceState& state, const std::vector<TokenId>& estimate,
                                   const PredictorOutput& output, int step_k,
                                   const UnmaskingStrategy& strategy,
                                   const std::vector<std::size_t>& targets, Rng& rng) {
    if (step_k < 1) throw PreconditionError("transition requires step k >= 1");
    if (estimate.size() != state.size() || output.length() != state.size()) {
        throw ShapeError("estimate/output length does not match the state");
    }
    for (std::size_t pos : targets) {
        if (pos >= state.size() || !state.is_masked(pos)) {
            throw PreconditionError("transition targets must be currently masked positions");
        }
    }

    TransitionResult result{state, {}};
    if (targets.empty()) return result;

    const int remaining = static_cast<int>(targets.size());
    const int count = std::min(remaining, strategy.schedule(remaining, step_k));

    std::vector<std::size_t> chosen;
    if (strategy.kind == StrategyKind::ConfidenceTopK) {
        std::vector<std::pair<double, std::size_t>> ranked;
        ranked.reserve(targets.size());
        for (std::size_t pos : targets) ranked.emplace_back(token_confidence(output, pos), pos);
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int i = 0; i < count; ++i) chosen.push_back(ranked[static_cast<std::size_t>(i)].second);
    } else {
        std::vector<std::size_t> pool = targets;
        for (int i = 0; i < count; ++i) {
            const std::size_t j = i + rng.next_below(pool.size() - static_cast<std::size_t>(i));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
            chosen.push_back(pool[static_cast<std::size_t>(i)]);
        }
    }
    std::sort(chosen.begin(), chosen.end());

    for (std::size_t pos : chosen) {
        result.state.write_token(pos, estimate[pos]);
    }
    result.unmasked = std::move(chosen);
    return result;
}

namespace detail {

inline TraceRecord make_record(int step, Phase phase, std::optional<double> avg_conf,
                               const SequenceState& state_after, const PredictorOutput& output,
                               const std::vector<std::size_t>& unmasked, int calls,
                               const TraceOptions& opts) {
    TraceRecord rec;
    rec.step = step;
    rec.phase = phase;
    rec.avg_answer_conf = avg_conf;
    rec.predictor_calls_cum = calls;
    auto add_entry = [&](std::size_t i, bool just) {
        const Section& sec = state_after.section_of(i);
        rec.positions.push_back({i, sec.kind, sec.step, state_after.tokens[i],
                                 token_confidence(output, i), just});
    };
    if (opts.capture_positions) {
        for (std::size_t i = 0; i < state_after.size(); ++i) {
            add_entry(i, std::binary_search(unmasked.begin(), unmasked.end(), i));
        }
    } else {
        for (std::size_t i : unmasked) add_entry(i, true);
    }
    return rec;
}

inline std::optional<double> answer_conf_or_none(const PredictorOutput& output,
                                                 const SequenceState& state) {
    double sum = 0.0;
    int n = 0;
    for (const Section& s : state.sections) {
        if (s.kind != SectionKind::Answer) continue;
        for (std::size_t i = s.begin; i < s.end; ++i) {
            if (!state.is_masked(i)) continue;
            sum += token_confidence(output, i);
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

inline int resolve_total_steps(const DecodeConfig& cfg, const SequenceState& initial) {
    const int n = cfg.total_steps > 0 ? cfg.total_steps : static_cast<int>(initial.masked_count());
    if (n < 1) throw PreconditionError("nothing to decode: no masked positions and no step budget");
    return n;
}

} // namespace detail

struct DecodeResult {
    SequenceState state;
    Trace trace;
    int predictor_calls = 0;
};

/// Baseline iterative refinement: predict, greedy-estimate, unmask over all
/// masked positions with no section distinction, for at most N steps. The
/// default schedule guarantees completion within the step budget.
inline DecodeResult decode_vanilla(const SequenceState& initial, const DecodeConfig& cfg,
                                   const Predictor& predictor, const TraceOptions& topts = {}) {
    cfg.validate();
    if (cfg.rung == DecodeRung::Ice) {
        throw PreconditionError("use decode_ice for the ice rung");
    }
    if (layout_rung_for(cfg.rung) != layout_rung_of(initial)) {
        throw PreconditionError("config rung does not match the layout rung");
    }

    const int total = detail::resolve_total_steps(cfg, initial);
    SequenceState state = initial;
    Rng rng(cfg.rng_seed);
    DecodeResult result;

    for (int k = total; k >= 1; --k) {
        const auto targets = masked_positions(state);
        if (targets.empty()) break;
        state.step_index = k;

        const PredictorOutput output = predictor.predict(state);
        ++result.predictor_calls;
        const auto avg_conf = detail::answer_conf_or_none(output, state);
        const auto estimate = greedy_estimate(output);

        auto tr = transition(state, estimate, output, k, cfg.strategy, targets, rng);
        state = std::move(tr.state);
        result.trace.push_back(detail::make_record(k, Phase::Reasoning, avg_conf, state, output,
                                                   tr.unmasked, result.predictor_calls, topts));
    }

    if (state.masked_count() != 0) {
        throw PreconditionError("step schedule exhausted with masked positions left");
    }
    result.state = std::move(state);
    return result;
}

} // namespace ice
