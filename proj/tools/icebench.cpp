// icebench: task generation, decode suites, the four-rung ablation ladder,
// sweep experiments and trace statistics for the in-place CoT early-exit
// decoder, all against the exact chained-arithmetic oracle.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ice/chain_task.hpp"
#include "ice/experiment.hpp"
#include "ice/trace.hpp"

namespace {

using Clock = std::chrono::steady_clock;

ice::DecodeRung rung_from_string(const std::string& s) {
    if (s == "vanilla") return ice::DecodeRung::Vanilla;
    if (s == "segment") return ice::DecodeRung::Segment;
    if (s == "structured") return ice::DecodeRung::Structured;
    if (s == "ice") return ice::DecodeRung::Ice;
    throw ice::ConfigError("unknown rung: " + s);
}

ice::StrategyKind strategy_from_string(const std::string& s) {
    if (s == "topk") return ice::StrategyKind::ConfidenceTopK;
    if (s == "stochastic") return ice::StrategyKind::StochasticK;
    throw ice::ConfigError("unknown strategy: " + s);
}

ice::Mode mode_from_string(const std::string& s) {
    if (s == "sp") return ice::Mode::SpeedPrioritized;
    if (s == "pp") return ice::Mode::PerformancePrioritized;
    throw ice::ConfigError("unknown mode: " + s);
}

struct CommonArgs {
    std::uint64_t seed = 1;
    double eps = 0.2;
    int nt = 3;
    int budget = 12;
    std::string alloc = "uniform";
    int answer_len = 1;
    std::string rung = "ice";
    int steps = 0;
    std::string strategy = "topk";
    std::string mode;
    double tau = -1.0;  // <0 -> unset
    bool pad_variants = false;
    int threads = 1;
    bool light_traces = false;
};

void add_common_options(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--seed", a.seed, "suite seed; per-task streams derive from it");
    cmd->add_option("--eps", a.eps, "oracle per-step error rate in [0,0.5)");
    cmd->add_option("--nt", a.nt, "number of thinking steps N_t");
    cmd->add_option("--budget", a.budget, "total masked thinking slots");
    cmd->add_option("--alloc", a.alloc, "mask allocation: uniform|front|back");
    cmd->add_option("--answer-len", a.answer_len, "answer section length");
    cmd->add_option("--rung", a.rung, "decoder rung: vanilla|segment|structured|ice");
    cmd->add_option("--steps", a.steps, "refinement steps N (0 = one per masked position)");
    cmd->add_option("--strategy", a.strategy, "unmasking: topk|stochastic");
    cmd->add_option("--mode", a.mode, "ice preset: sp|pp");
    cmd->add_option("--tau", a.tau, "confidence threshold (>1 disables early exit)");
    cmd->add_flag("--pad-variants", a.pad_variants, "enable PAD placement variants on vanilla layouts");
    cmd->add_option("--threads", a.threads, "parallel workers (results are thread-count independent)");
    cmd->add_flag("--light-traces", a.light_traces, "record only just-unmasked positions per step");
    cmd->set_config("--config", "", "read options from a key=value file; flags override it");
}

ice::ExperimentConfig to_config(const CommonArgs& a) {
    ice::ExperimentConfig cfg;
    cfg.seed = a.seed;
    cfg.eps = a.eps;
    cfg.n_thinking_steps = a.nt;
    cfg.thinking_budget = a.budget;
    cfg.allocation = ice::allocation_from_string(a.alloc);
    cfg.answer_len = a.answer_len;
    cfg.rung = rung_from_string(a.rung);
    cfg.steps = a.steps;
    cfg.strategy = strategy_from_string(a.strategy);
    if (!a.mode.empty()) cfg.mode = mode_from_string(a.mode);
    if (a.tau >= 0.0) cfg.tau = a.tau;
    cfg.pad_variants = a.pad_variants;
    cfg.threads = a.threads;
    cfg.capture_positions = !a.light_traces;
    make_layout_spec(cfg, cfg.rung).validate();  // reject bad layouts before any task runs
    if (cfg.eps < 0.0 || cfg.eps >= 0.5) throw ice::ConfigError("--eps must lie in [0,0.5)");
    return cfg;
}

double baseline_mean_calls(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ice::IoError("cannot open baseline summary: " + path);
    std::string line;
    std::string aggregate;
    while (std::getline(is, line)) {
        if (line.rfind("aggregate,", 0) == 0) aggregate = line;
    }
    if (aggregate.empty()) throw ice::ConfigError("baseline summary has no aggregate row: " + path);
    std::vector<std::string> fields;
    std::stringstream ss(aggregate);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() < 8) throw ice::ConfigError("malformed aggregate row in: " + path);
    return std::stod(fields[7]);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"masked-diffusion decode bench over the chained-arithmetic oracle"};
    app.require_subcommand(1);

    // gen-tasks
    auto* gen = app.add_subcommand("gen-tasks", "sample a deterministic task file");
    std::uint64_t gen_seed = 1;
    int gen_n = 100, gen_m_min = 2, gen_m_max = 4;
    std::string gen_out;
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--n", gen_n, "number of tasks");
    gen->add_option("--m-min", gen_m_min, "minimum chain length (>=2)");
    gen->add_option("--m-max", gen_m_max, "maximum chain length (<=6)");
    gen->add_option("--out", gen_out, "output task file")->required();
    gen->set_config("--config");

    // run
    auto* run = app.add_subcommand("run", "decode a task suite and write a summary CSV");
    CommonArgs run_args;
    std::string run_tasks, run_out, run_traces, run_baseline;
    add_common_options(run, run_args);
    run->add_option("--tasks", run_tasks, "input task file")->required();
    run->add_option("--out", run_out, "summary CSV path")->required();
    run->add_option("--traces", run_traces, "directory for per-task trace files");
    run->add_option("--baseline", run_baseline, "prior summary CSV; adds a speedup column");

    // ladder
    auto* ladder = app.add_subcommand("ladder", "run the four-rung ablation ladder");
    CommonArgs ladder_args;
    std::string ladder_tasks, ladder_out, ladder_traces;
    add_common_options(ladder, ladder_args);
    ladder->add_option("--tasks", ladder_tasks, "input task file")->required();
    ladder->add_option("--out", ladder_out, "ladder CSV path")->required();
    ladder->add_option("--traces", ladder_traces, "directory for per-rung trace files");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "sweep one axis and write a long-format CSV");
    CommonArgs sweep_args;
    std::string sweep_tasks, sweep_out, sweep_axis;
    std::vector<std::string> sweep_values;
    add_common_options(sweep_cmd, sweep_args);
    sweep_cmd->add_option("--tasks", sweep_tasks, "input task file")->required();
    sweep_cmd->add_option("--axis", sweep_axis, "nt|tau|alloc")->required();
    sweep_cmd->add_option("--values", sweep_values, "axis values")->required()->delimiter(',');
    sweep_cmd->add_option("--out", sweep_out, "sweep CSV path")->required();

    // trace-stats
    auto* stats = app.add_subcommand("trace-stats", "trajectory and jump statistics from trace files");
    std::vector<std::string> stat_traces;
    double stat_delta = 0.15;
    std::string stat_hist_out, stat_traj_out;
    stats->add_option("--trace", stat_traces, "trace file (repeatable)")->required();
    stats->add_option("--delta", stat_delta, "confidence jump threshold");
    stats->add_option("--hist-out", stat_hist_out, "jump category histogram CSV");
    stats->add_option("--traj-out", stat_traj_out, "trajectory CSV (single trace input only)");
    stats->set_config("--config");

    CLI11_PARSE(app, argc, argv);

    const auto& vocab = ice::Vocabulary::builtin();
    const auto t0 = Clock::now();
    try {
        if (gen->parsed()) {
            const auto tasks = ice::gen_tasks(gen_seed, gen_n, gen_m_min, gen_m_max);
            ice::write_task_file(gen_out, tasks);
            std::printf("wrote %d tasks to %s\n", gen_n, gen_out.c_str());
        } else if (run->parsed()) {
            const auto cfg = to_config(run_args);
            const auto tasks = ice::read_task_file(run_tasks);
            std::optional<double> baseline;
            if (!run_baseline.empty()) baseline = baseline_mean_calls(run_baseline);
            const auto outcome = ice::run_suite(vocab, cfg, tasks, run_traces, baseline);
            ice::write_summary_csv_file(run_out, outcome);
            std::printf("rung=%s tasks=%d accuracy=%.4f mean_calls=%.3f errors=%d\n",
                        ice::to_string(cfg.rung), outcome.n_tasks, outcome.accuracy,
                        outcome.mean_predictor_calls, outcome.error_count);
            if (outcome.speedup) std::printf("speedup vs baseline: %.3fx\n", *outcome.speedup);
        } else if (ladder->parsed()) {
            const auto cfg = to_config(ladder_args);
            const auto tasks = ice::read_task_file(ladder_tasks);
            const auto rungs = ice::run_ablation_ladder(vocab, cfg, tasks, ladder_traces);
            std::ofstream os(ladder_out, std::ios::binary);
            if (!os) throw ice::IoError("cannot open ladder output: " + ladder_out);
            ice::write_ladder_csv(os, rungs);
            for (std::size_t i = 0; i < rungs.size(); ++i) {
                std::printf("%-10s accuracy=%.4f mean_calls=%.3f\n",
                            ice::to_string(ice::kLadderRungs[i]), rungs[i].accuracy,
                            rungs[i].mean_predictor_calls);
            }
        } else if (sweep_cmd->parsed()) {
            const auto cfg = to_config(sweep_args);
            const auto tasks = ice::read_task_file(sweep_tasks);
            const auto rows =
                ice::sweep(vocab, cfg, ice::sweep_axis_from_string(sweep_axis), sweep_values, tasks);
            std::ofstream os(sweep_out, std::ios::binary);
            if (!os) throw ice::IoError("cannot open sweep output: " + sweep_out);
            ice::write_sweep_csv(os, rows);
            std::printf("swept %s over %zu values (%zu rows)\n", sweep_axis.c_str(),
                        sweep_values.size(), rows.size());
        } else if (stats->parsed()) {
            if (!stat_traj_out.empty() && stat_traces.size() != 1) {
                throw ice::ConfigError("--traj-out needs exactly one --trace input");
            }
            std::vector<ice::Trace> traces;
            for (const auto& path : stat_traces) {
                std::ifstream is(path);
                if (!is) throw ice::IoError("cannot open trace: " + path);
                traces.push_back(ice::read_trace_jsonl(is));
            }
            if (!stat_hist_out.empty()) {
                const auto hist = ice::jump_category_histogram(traces, stat_delta, vocab);
                std::ofstream os(stat_hist_out, std::ios::binary);
                if (!os) throw ice::IoError("cannot open histogram output: " + stat_hist_out);
                ice::write_histogram_csv(os, hist);
            }
            if (!stat_traj_out.empty()) {
                std::ofstream os(stat_traj_out, std::ios::binary);
                if (!os) throw ice::IoError("cannot open trajectory output: " + stat_traj_out);
                ice::write_trajectory_csv(os, traces.front());
            }
            std::printf("processed %zu trace(s)\n", traces.size());
        }
    } catch (const ice::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
    std::fprintf(stderr, "wall time: %lld ms\n", static_cast<long long>(ms));
    return 0;
}
