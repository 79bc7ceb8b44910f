#pragma once

#include <optional>
#include <utility>

#include "ice/decoder.hpp"
#include "ice/errors.hpp"
#include "ice/layout.hpp"
#include "ice/predictor.hpp"
#include "ice/trace.hpp"

namespace ice {

enum class ExitReason { Threshold, Exhausted };

inline const char* to_string(ExitReason r) {
    return r == ExitReason::Threshold ? "threshold" : "exhausted";
}

/// Outcome of the two-phase decode: which phase finished the run, where the
/// early exit fired (if it did) and the answer confidence recorded there.
struct PhaseState {
    Phase phase = Phase::Reasoning;
    std::optional<int> exit_step;  // set iff exit_reason == Threshold
    ExitReason exit_reason = ExitReason::Exhausted;
    double final_confidence = 0.0;
};

/// Mean max-probability over the currently masked answer positions.
inline double avg_answer_confidence(const PredictorOutput& output, const SequenceState& state) {
    const auto conf = detail::answer_conf_or_none(output, state);
    if (!conf) throw UndefinedConfidenceError("no masked answer positions to average over");
    return *conf;
}

inline bool check_early_exit(double avg_conf, double tau) { return avg_conf >= tau; }

struct IceResult {
    SequenceState state;
    PhaseState phase;
    Trace trace;
    int predictor_calls = 0;
};

/// Two-phase decode. Phase 1 refines thinking positions only while checking
/// the average masked-answer confidence at every step; crossing tau stops
/// the loop immediately. Phase 2 reveals all answer positions (and whatever
/// thinking is still masked) in one step from the last predictor output, so
/// it costs no extra predictor call: at a threshold exit that output is
/// exactly the conditional on the current state.
///
/// Phase 1 also stops, with reason Exhausted, when the thinking region is
/// fully revealed before the threshold is reached or when the step budget
/// runs out; in the latter case the reused output predates the final
/// unmasking by one step.
inline IceResult decode_ice(const SequenceState& initial, const DecodeConfig& cfg,
                            const Predictor& predictor, const TraceOptions& topts = {}) {
    cfg.validate();
    if (cfg.rung != DecodeRung::Ice) throw PreconditionError("decode_ice requires the ice rung");
    if (layout_rung_of(initial) == LayoutRung::Vanilla) {
        throw PreconditionError("ice decoding needs a layout with an answer section");
    }
    if (masked_positions_in(initial, SectionKind::Answer).empty()) {
        throw PreconditionError("ice decoding needs masked answer positions");
    }
    const double tau = *cfg.tau;

    const int total = detail::resolve_total_steps(cfg, initial);
    SequenceState state = initial;
    Rng rng(cfg.rng_seed);
    IceResult result;

    std::optional<PredictorOutput> last_output;
    double last_conf = 0.0;
    int phase2_step = 0;

    for (int k = total; k >= 1; --k) {
        state.step_index = k;
        PredictorOutput output = predictor.predict(state);
        ++result.predictor_calls;
        const double conf = avg_answer_confidence(output, state);
        last_conf = conf;
        phase2_step = k;

        if (check_early_exit(conf, tau)) {
            result.trace.push_back(detail::make_record(k, Phase::Reasoning, conf, state, output, {},
                                                       result.predictor_calls, topts));
            result.phase = {Phase::AnswerGeneration, k, ExitReason::Threshold, conf};
            last_output = std::move(output);
            break;
        }

        const auto thinking = masked_positions_in(state, SectionKind::ThinkingSlot);
        if (thinking.empty()) {
            // Nothing left to refine and the answer never crossed tau.
            result.trace.push_back(detail::make_record(k, Phase::Reasoning, conf, state, output, {},
                                                       result.predictor_calls, topts));
            result.phase = {Phase::AnswerGeneration, std::nullopt, ExitReason::Exhausted, conf};
            last_output = std::move(output);
            break;
        }

        auto tr = transition(state, greedy_estimate(output), output, k, cfg.strategy, thinking, rng);
        state = std::move(tr.state);
        result.trace.push_back(detail::make_record(k, Phase::Reasoning, conf, state, output,
                                                   tr.unmasked, result.predictor_calls, topts));
        last_output = std::move(output);
        result.phase = {Phase::Reasoning, std::nullopt, ExitReason::Exhausted, conf};
        phase2_step = k - 1;
    }

    // Phase 2: single-step reveal from the last computed output.
    result.phase.phase = Phase::AnswerGeneration;
    result.phase.final_confidence = last_conf;
    const auto estimate = greedy_estimate(*last_output);
    auto reveal = masked_positions(state);
    for (std::size_t pos : reveal) state.write_token(pos, estimate[pos]);
    result.trace.push_back(detail::make_record(phase2_step, Phase::AnswerGeneration, last_conf, state,
                                               *last_output, reveal, result.predictor_calls, topts));
    result.state = std::move(state);
    return result;
}

enum class Mode { SpeedPrioritized, PerformancePrioritized };

inline const char* to_string(Mode m) {
    return m == Mode::SpeedPrioritized ? "sp" : "pp";
}

/// Preset decode configurations. SP trades confidence headroom for calls
/// (low tau, aggressive schedule); PP holds out for a high threshold with
/// the default schedule. Every field stays overridable after the call.
inline DecodeConfig mode_preset(Mode mode) {
    DecodeConfig cfg;
    cfg.rung = DecodeRung::Ice;
    if (mode == Mode::SpeedPrioritized) {
        cfg.tau = 0.70;
        cfg.strategy.kind = StrategyKind::ConfidenceTopK;
        cfg.strategy.k_sched = aggressive_k_sched;
    } else {
        cfg.tau = 0.95;
        cfg.strategy.kind = StrategyKind::ConfidenceTopK;
    }
    return cfg;
}

} // namespace ice
