#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ice/chain_task.hpp"
#include "ice/decoder.hpp"
#include "ice/engine.hpp"
#include "ice/errors.hpp"
#include "ice/layout.hpp"
#include "ice/oracle.hpp"
#include "ice/trace.hpp"

namespace ice {

/// Everything needed to reproduce a run: task distribution, layout recipe,
/// decode settings and the suite seed. Per-task RNG streams are derived
/// from the seed, so thread count never changes results.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    double eps = 0.2;

    // task generation (gen-tasks)
    int n_tasks = 100;
    int m_min = 2;
    int m_max = 4;

    // layout
    int n_thinking_steps = 3;
    int thinking_budget = 12;
    Allocation allocation = Allocation::Uniform;
    int answer_len = 1;

    // decoding
    DecodeRung rung = DecodeRung::Ice;
    int steps = 0;  // 0 -> one step per masked position
    StrategyKind strategy = StrategyKind::ConfidenceTopK;
    std::optional<Mode> mode;   // SP/PP preset for ice decoding
    std::optional<double> tau;  // overrides the preset; default 0.9

    // oracle
    bool pad_variants = false;

    // execution
    int threads = 1;
    bool capture_positions = true;
};

inline LayoutSpec make_layout_spec(const ExperimentConfig& cfg, DecodeRung rung) {
    LayoutSpec spec;
    spec.n_thinking_steps = cfg.n_thinking_steps;
    spec.total_thinking_budget = cfg.thinking_budget;
    spec.allocation = cfg.allocation;
    spec.answer_len = cfg.answer_len;
    spec.rung = layout_rung_for(rung);
    return spec;
}

inline DecodeConfig make_decode_config(const ExperimentConfig& cfg, DecodeRung rung,
                                       std::uint64_t task_seed) {
    DecodeConfig dc;
    if (rung == DecodeRung::Ice && cfg.mode) dc = mode_preset(*cfg.mode);
    dc.rung = rung;
    dc.total_steps = cfg.steps;
    dc.rng_seed = task_seed;
    dc.strategy.kind = cfg.strategy;
    if (rung == DecodeRung::Ice) {
        if (cfg.tau) dc.tau = *cfg.tau;
        if (!dc.tau) dc.tau = 0.9;
    } else {
        dc.tau = std::nullopt;
    }
    return dc;
}

struct RunSummary {
    int task_id = 0;
    std::string rung;
    int m = 0;
    int true_answer = 0;
    std::string decoded_answer;
    bool correct = false;
    int steps_used = 0;
    int predictor_calls = 0;
    std::optional<int> exit_step;
    std::string exit_reason;
    std::optional<double> final_avg_answer_conf;
    std::string error;
};

struct TaskRun {
    RunSummary summary;
    Trace trace;
};

/// Decoded answer token of a finished sequence: the first answer-section
/// token where one exists, otherwise (vanilla rung) the last non-PAD token
/// of the generation span.
inline std::optional<TokenId> extract_answer_token(const Vocabulary& vocab,
                                                   const SequenceState& state) {
    const auto answer = section_positions(state, SectionKind::Answer);
    if (!answer.empty()) return state.tokens[answer.front()];
    const auto span = section_positions(state, SectionKind::ThinkingSlot);
    for (auto it = span.rbegin(); it != span.rend(); ++it) {
        if (state.tokens[*it] != vocab.pad_token()) return state.tokens[*it];
    }
    return std::nullopt;
}

inline TaskRun run_one(const Vocabulary& vocab, const ExperimentConfig& cfg, DecodeRung rung,
                       const ChainArithTask& task, int task_id) {
    TaskRun run;
    run.summary.task_id = task_id;
    run.summary.rung = to_string(rung);
    if (rung == DecodeRung::Ice && cfg.mode) {
        run.summary.rung += std::string("-") + to_string(*cfg.mode);
    }
    run.summary.m = task.m;
    run.summary.true_answer = task.true_answer();

    try {
        const LayoutSpec spec = make_layout_spec(cfg, rung);
        const auto prompt = encode_prompt(task, vocab);
        const SequenceState state0 = build_layout(vocab, prompt, spec);

        CandidateOptions copts;
        copts.pad_variants = cfg.pad_variants;
        const OraclePredictor oracle(
            enumerate_candidates(task, spec, cfg.eps, vocab, copts),
            static_cast<std::size_t>(vocab.size()));

        const DecodeConfig dc =
            make_decode_config(cfg, rung, Rng::derive(cfg.seed, static_cast<std::uint64_t>(task_id)));
        const TraceOptions topts{cfg.capture_positions};

        SequenceState final_state;
        if (rung == DecodeRung::Ice) {
            IceResult res = decode_ice(state0, dc, oracle, topts);
            run.summary.predictor_calls = res.predictor_calls;
            run.summary.steps_used = res.predictor_calls;
            if (res.phase.exit_reason == ExitReason::Threshold) {
                run.summary.exit_step = res.phase.exit_step;
            }
            run.summary.exit_reason = to_string(res.phase.exit_reason);
            run.summary.final_avg_answer_conf = res.phase.final_confidence;
            run.trace = std::move(res.trace);
            final_state = std::move(res.state);
        } else {
            DecodeResult res = decode_vanilla(state0, dc, oracle, topts);
            run.summary.predictor_calls = res.predictor_calls;
            run.summary.steps_used = res.predictor_calls;
            for (auto it = res.trace.rbegin(); it != res.trace.rend(); ++it) {
                if (it->avg_answer_conf) {
                    run.summary.final_avg_answer_conf = it->avg_answer_conf;
                    break;
                }
            }
            run.trace = std::move(res.trace);
            final_state = std::move(res.state);
        }

        const auto answer = extract_answer_token(vocab, final_state);
        if (answer) run.summary.decoded_answer = vocab.symbol(*answer);
        run.summary.correct = answer && *answer == vocab.digit(run.summary.true_answer);
    } catch (const Error& e) {
        run.summary.error = e.what();
        run.summary.correct = false;
    }
    return run;
}

struct SuiteOutcome {
    std::vector<RunSummary> rows;
    int n_tasks = 0;
    double accuracy = 0.0;
    double mean_predictor_calls = 0.0;
    int error_count = 0;
    std::optional<double> speedup;
};

namespace detail {

inline SuiteOutcome aggregate_rows(std::vector<RunSummary> rows,
                                   std::optional<double> baseline_mean_calls) {
    SuiteOutcome out;
    out.n_tasks = static_cast<int>(rows.size());
    long correct = 0;
    long calls = 0;
    for (const RunSummary& r : rows) {
        correct += r.correct ? 1 : 0;
        calls += r.predictor_calls;
        out.error_count += r.error.empty() ? 0 : 1;
    }
    if (out.n_tasks > 0) {
        out.accuracy = static_cast<double>(correct) / out.n_tasks;
        out.mean_predictor_calls = static_cast<double>(calls) / out.n_tasks;
    }
    if (baseline_mean_calls && out.mean_predictor_calls > 0.0) {
        out.speedup = *baseline_mean_calls / out.mean_predictor_calls;
    }
    out.rows = std::move(rows);
    return out;
}

} // namespace detail

/// Run the configured decoder over every task. Tasks execute on
/// cfg.threads workers; rows come back ordered by task id and are
/// bit-identical regardless of the worker count. Per-task failures land in
/// the row's error column and never abort the suite.
inline SuiteOutcome run_suite(const Vocabulary& vocab, const ExperimentConfig& cfg,
                              const std::vector<ChainArithTask>& tasks,
                              const std::string& trace_dir = {},
                              std::optional<double> baseline_mean_calls = {}) {
    if (tasks.empty()) throw PreconditionError("suite needs at least one task");

    std::vector<TaskRun> runs(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            runs[i] = run_one(vocab, cfg, cfg.rung, tasks[i], static_cast<int>(i));
        }
    };
    const int n_threads = std::max(1, cfg.threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (!trace_dir.empty()) {
        std::filesystem::create_directories(trace_dir);
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto path = std::filesystem::path(trace_dir) /
                              ("task_" + std::to_string(i) + ".trace.jsonl");
            std::ofstream os(path, std::ios::binary);
            if (!os) throw IoError("cannot open trace file for writing: " + path.string());
            write_trace_jsonl(os, runs[i].trace);
        }
    }

    std::vector<RunSummary> rows;
    rows.reserve(runs.size());
    for (auto& r : runs) rows.push_back(std::move(r.summary));
    return detail::aggregate_rows(std::move(rows), baseline_mean_calls);
}

// --- CSV writers ------------------------------------------------------

namespace detail {

inline std::string csv_safe(std::string s) {
    for (char& c : s) {
        if (c == ',' || c == '\n') c = ';';
    }
    return s;
}

} // namespace detail

inline void write_summary_csv(std::ostream& os, const SuiteOutcome& outcome) {
    os << "task_id,rung,m,true_answer,decoded_answer,correct,steps_used,predictor_calls,"
          "exit_step,exit_reason,final_avg_answer_conf,error,speedup\n";
    for (const RunSummary& r : outcome.rows) {
        os << r.task_id << ',' << r.rung << ',' << r.m << ',' << r.true_answer << ','
           << detail::csv_safe(r.decoded_answer) << ',' << (r.correct ? 1 : 0) << ','
           << r.steps_used << ',' << r.predictor_calls << ','
           << (r.exit_step ? std::to_string(*r.exit_step) : std::string{}) << ','
           << r.exit_reason << ','
           << (r.final_avg_answer_conf ? format_double(*r.final_avg_answer_conf) : std::string{})
           << ',' << detail::csv_safe(r.error) << ",\n";
    }
    os << "aggregate," << (outcome.rows.empty() ? "" : outcome.rows.front().rung) << ",,,,"
       << format_double(outcome.accuracy) << ",," << format_double(outcome.mean_predictor_calls)
       << ",,,," << outcome.error_count << " errors,"
       << (outcome.speedup ? format_double(*outcome.speedup) : std::string{}) << '\n';
}

inline void write_summary_csv_file(const std::string& path, const SuiteOutcome& outcome) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open summary file for writing: " + path);
    write_summary_csv(os, outcome);
}

// --- ablation ladder --------------------------------------------------

inline constexpr DecodeRung kLadderRungs[] = {DecodeRung::Vanilla, DecodeRung::Segment,
                                              DecodeRung::Structured, DecodeRung::Ice};

/// Run the four rungs on identical tasks and seeds: plain span, thinking/
/// answer split, step templates, and templates plus early exit.
inline std::vector<SuiteOutcome> run_ablation_ladder(const Vocabulary& vocab,
                                                     const ExperimentConfig& cfg,
                                                     const std::vector<ChainArithTask>& tasks,
                                                     const std::string& trace_dir = {}) {
    std::vector<SuiteOutcome> out;
    for (DecodeRung rung : kLadderRungs) {
        ExperimentConfig c = cfg;
        c.rung = rung;
        const std::string dir =
            trace_dir.empty() ? std::string{}
                              : (std::filesystem::path(trace_dir) / to_string(rung)).string();
        out.push_back(run_suite(vocab, c, tasks, dir));
    }
    return out;
}

inline void write_ladder_csv(std::ostream& os, const std::vector<SuiteOutcome>& ladder) {
    os << "rung,accuracy,mean_predictor_calls,error_count,speedup_vs_vanilla\n";
    const double base = ladder.empty() ? 0.0 : ladder.front().mean_predictor_calls;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        const SuiteOutcome& o = ladder[i];
        const double speedup = o.mean_predictor_calls > 0.0 ? base / o.mean_predictor_calls : 0.0;
        os << to_string(kLadderRungs[i]) << ',' << format_double(o.accuracy) << ','
           << format_double(o.mean_predictor_calls) << ',' << o.error_count << ','
           << format_double(speedup) << '\n';
    }
}

// --- sweeps -----------------------------------------------------------

enum class SweepAxis { ThinkingSteps, Tau, Alloc };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::ThinkingSteps: return "n_thinking_steps";
        case SweepAxis::Tau: return "tau";
        case SweepAxis::Alloc: return "allocation";
    }
    return "?";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "nt" || s == "n_thinking_steps") return SweepAxis::ThinkingSteps;
    if (s == "tau") return SweepAxis::Tau;
    if (s == "alloc" || s == "allocation") return SweepAxis::Alloc;
    throw ConfigError("unknown sweep axis: " + s);
}

inline Allocation allocation_from_string(const std::string& s) {
    if (s == "uniform") return Allocation::Uniform;
    if (s == "front") return Allocation::FrontHeavy;
    if (s == "back") return Allocation::BackHeavy;
    throw ConfigError("unknown allocation: " + s);
}

struct SweepRow {
    std::string axis;
    std::string value;
    std::string metric;
    double result = 0.0;
};

/// One run_suite per axis value over shared tasks and seed; long-format
/// rows keyed by (axis value, metric).
inline std::vector<SweepRow> sweep(const Vocabulary& vocab, const ExperimentConfig& cfg,
                                   SweepAxis axis, const std::vector<std::string>& values,
                                   const std::vector<ChainArithTask>& tasks) {
    if (values.empty()) throw PreconditionError("sweep needs at least one value");
    std::vector<SweepRow> rows;
    for (const std::string& value : values) {
        ExperimentConfig c = cfg;
        switch (axis) {
            case SweepAxis::ThinkingSteps: c.n_thinking_steps = std::stoi(value); break;
            case SweepAxis::Tau: c.tau = std::stod(value); break;
            case SweepAxis::Alloc: c.allocation = allocation_from_string(value); break;
        }
        const SuiteOutcome o = run_suite(vocab, c, tasks);
        for (const auto& [metric, result] :
             {std::pair<const char*, double>{"accuracy", o.accuracy},
              {"mean_predictor_calls", o.mean_predictor_calls},
              {"error_count", static_cast<double>(o.error_count)}}) {
            rows.push_back({to_string(axis), value, metric, result});
        }
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "axis,value,metric,result\n";
    for (const SweepRow& r : rows) {
        os << r.axis << ',' << r.value << ',' << r.metric << ',' << format_double(r.result) << '\n';
    }
}

} // namespace ice
