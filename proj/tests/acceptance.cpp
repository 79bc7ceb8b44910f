// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Quantitative checks run against the exact enumerated oracle on the
// chained-arithmetic task family; statistical checks use frozen seeds.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ice/diffusion.hpp"
#include "ice/experiment.hpp"

using namespace ice;

namespace {

using Clock = std::chrono::steady_clock;

struct Criterion {
    int id;
    const char* label;
    bool ok = true;
    Clock::time_point start = Clock::now();

    Criterion(int id_, const char* label_) : id(id_), label(label_) {}
    ~Criterion() {
        const double secs =
            std::chrono::duration<double>(Clock::now() - start).count();
        std::printf("[criterion %2d] %s - %s (%.2fs)\n", id, ok ? "PASS" : "FAIL", label, secs);
        std::fflush(stdout);
    }
    double elapsed() const { return std::chrono::duration<double>(Clock::now() - start).count(); }
};

#define ACCEPT(crit, expr)                                                                         \
    do {                                                                                           \
        const bool accept_ok_ = static_cast<bool>(expr);                                           \
        CHECK_MESSAGE(accept_ok_, #expr);                                                          \
        (crit).ok = (crit).ok && accept_ok_;                                                       \
    } while (0)

SequenceState plain_state(const Vocabulary& v, std::size_t len) {
    SequenceState st;
    for (std::size_t i = 0; i < len; ++i) {
        st.tokens.push_back(v.digit(static_cast<int>(i % 10)));
        st.masked.push_back(0);
    }
    st.sections.push_back({SectionKind::Prompt, 0, 0, len});
    return st;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE_MESSAGE(is, "missing file: " << p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Reference marginals for criterion 3: per-candidate consistency flags, one
// shared normalizer, then per-(position, token) filtered weight sums. This
// deliberately mirrors the definition instead of the production single-pass
// scatter in oracle_conditional.
std::vector<double> reference_marginals(const CandidateSet& set, const SequenceState& st,
                                        std::size_t vocab) {
    const std::size_t len = st.size();
    std::vector<char> live(set.candidates.size(), 1);
    for (std::size_t c = 0; c < set.candidates.size(); ++c) {
        for (std::size_t i = 0; i < len; ++i) {
            if (!st.is_masked(i) && set.candidates[c].tokens[i] != st.tokens[i]) {
                live[c] = 0;
                break;
            }
        }
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < set.candidates.size(); ++c) {
        if (live[c]) denom += set.candidates[c].weight;
    }
    REQUIRE(denom > 0.0);
    std::vector<double> flat(len * vocab, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t tok = 0; tok < vocab; ++tok) {
            double num = 0.0;
            for (std::size_t c = 0; c < set.candidates.size(); ++c) {
                if (live[c] && set.candidates[c].tokens[i] == static_cast<TokenId>(tok)) {
                    num += set.candidates[c].weight;
                }
            }
            flat[i * vocab + tok] = num / denom;
        }
    }
    return flat;
}

ExperimentConfig suite_config(double eps, double tau, int answer_len) {
    ExperimentConfig cfg;
    cfg.seed = 1;
    cfg.eps = eps;
    cfg.n_thinking_steps = 3;
    cfg.thinking_budget = 12;
    cfg.answer_len = answer_len;
    cfg.rung = DecodeRung::Ice;
    cfg.tau = tau;
    return cfg;
}

} // namespace

TEST_CASE("criterion 1: forward-process marginal concentration") {
    Criterion crit(1, "forward-process mask fraction within 4 sigma of t");
    const auto& v = Vocabulary::builtin();
    const std::size_t len = 10000;
    const auto x0 = plain_state(v, len);
    const double sigma_frac = 0.005;  // sqrt(0.25 / 10000)
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto xt = corrupt(x0, 0.5, {}, seed, v);
        const double frac = static_cast<double>(xt.masked_count()) / static_cast<double>(len);
        ACCEPT(crit, std::abs(frac - 0.5) <= 4.0 * sigma_frac);
    }
    ACCEPT(crit, crit.elapsed() < 1.0);
}

TEST_CASE("criterion 2: nelbo sanity") {
    Criterion crit(2, "uniform nelbo = 10 ln 24 within 3 SE; exact oracle < 0.01 nats");
    const auto& v = Vocabulary::builtin();

    const UniformPredictor uniform(static_cast<std::size_t>(v.size()));
    const auto res = nelbo_estimate(uniform, plain_state(v, 10), 2000, 7, v);
    const double expected = 10.0 * std::log(24.0);
    ACCEPT(crit, std::abs(expected - 31.78) < 0.01);
    ACCEPT(crit, res.std_error > 0.0);
    ACCEPT(crit, std::abs(res.estimate - expected) <= 3.0 * res.std_error);

    ChainArithTask task;
    task.m = 3;
    task.first_value = 4;
    task.steps = {{'*', 2}, {'-', 3}};
    LayoutSpec spec;
    spec.n_thinking_steps = 2;
    spec.total_thinking_budget = 8;
    const auto set = enumerate_candidates(task, spec, 0.0, v);
    SequenceState x0;
    x0.tokens = set.candidates.front().tokens;
    x0.masked.assign(x0.tokens.size(), 0);
    x0.sections = build_layout(v, encode_prompt(task, v), spec).sections;
    const OraclePredictor oracle(set, static_cast<std::size_t>(v.size()));
    const auto zero = nelbo_estimate(oracle, x0, 400, 21, v);
    ACCEPT(crit, zero.estimate < 0.01);

    ACCEPT(crit, crit.elapsed() < 5.0);
}

TEST_CASE("criterion 3: oracle marginals match an independent re-enumeration") {
    Criterion crit(3, "oracle vs reference marginals to 1e-9 on every reachable state");
    const auto& v = Vocabulary::builtin();
    const std::size_t vocab = static_cast<std::size_t>(v.size());

    double worst = 0.0;
    for (int m = 2; m <= 4; ++m) {
        for (double eps : {0.0, 0.1, 0.2}) {
            const auto tasks = gen_tasks(1000 + static_cast<std::uint64_t>(m), 50, m, m);
            for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
                LayoutSpec spec;
                spec.n_thinking_steps = 3;
                spec.total_thinking_budget = 12;
                spec.answer_len = 2;
                const auto set = enumerate_candidates(tasks[ti], spec, eps, v);
                const OraclePredictor oracle(set, vocab);
                const auto st0 = build_layout(v, encode_prompt(tasks[ti], v), spec);

                auto check_state = [&](const SequenceState& st) {
                    const auto out = oracle.predict(st);
                    const auto ref = reference_marginals(set, st, vocab);
                    for (std::size_t i = 0; i < st.size(); ++i) {
                        const auto row = out.row(i);
                        for (std::size_t tok = 0; tok < vocab; ++tok) {
                            worst = std::max(worst, std::abs(row[tok] - ref[i * vocab + tok]));
                        }
                    }
                };

                UnmaskingStrategy one;
                one.k_sched = [](int, int) { return 1; };
                Rng rng(Rng::derive(5, ti));

                // full-decode path: unmask everything one token at a time
                SequenceState st = st0;
                check_state(st);
                while (st.masked_count() > 0) {
                    const auto out = oracle.predict(st);
                    auto tr = transition(st, greedy_estimate(out), out, 1 + static_cast<int>(st.masked_count()),
                                         one, masked_positions(st), rng);
                    st = std::move(tr.state);
                    check_state(st);
                }

                // thinking-only path with the 0.9 threshold exit
                st = st0;
                while (true) {
                    const auto out = oracle.predict(st);
                    if (avg_answer_confidence(out, st) >= 0.9) break;
                    const auto targets = masked_positions_in(st, SectionKind::ThinkingSlot);
                    if (targets.empty()) break;
                    auto tr = transition(st, greedy_estimate(out), out,
                                         1 + static_cast<int>(targets.size()), one, targets, rng);
                    st = std::move(tr.state);
                    check_state(st);
                }
            }
        }
    }
    ACCEPT(crit, worst <= 1e-9);
    ACCEPT(crit, crit.elapsed() < 30.0);
}

TEST_CASE("criterion 4: certain-oracle decodes are exact") {
    Criterion crit(4, "eps=0 suite decodes byte-equal canonical sequences, accuracy 1.0");
    const auto& v = Vocabulary::builtin();
    const auto tasks = gen_tasks(4, 200, 2, 4);

    for (DecodeRung rung : {DecodeRung::Vanilla, DecodeRung::Segment, DecodeRung::Structured}) {
        int correct = 0;
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
            ExperimentConfig cfg = suite_config(0.0, 0.9, 1);
            cfg.rung = rung;
            const LayoutSpec spec = make_layout_spec(cfg, rung);
            const auto set = enumerate_candidates(tasks[ti], spec, 0.0, v);
            const auto st0 = build_layout(v, encode_prompt(tasks[ti], v), spec);
            const OraclePredictor oracle(set, static_cast<std::size_t>(v.size()));
            const auto res = decode_vanilla(st0, make_decode_config(cfg, rung, Rng::derive(4, ti)),
                                            oracle);
            ACCEPT(crit, res.state.tokens == set.candidates.front().tokens);
            const auto answer = extract_answer_token(v, res.state);
            correct += (answer && *answer == v.digit(tasks[ti].true_answer())) ? 1 : 0;
        }
        ACCEPT(crit, correct == static_cast<int>(tasks.size()));
    }
}

TEST_CASE("criterion 5: early-exit contract") {
    Criterion crit(5, "no sub-tau exits; ice calls <= vanilla with >=90% strict; accuracy held");
    const auto& v = Vocabulary::builtin();
    const auto tasks = gen_tasks(55, 200, 2, 4);

    ExperimentConfig ice_cfg = suite_config(0.2, 0.9, 3);
    const auto ice_out = run_suite(v, ice_cfg, tasks);

    ExperimentConfig van_cfg = ice_cfg;
    van_cfg.rung = DecodeRung::Structured;
    van_cfg.tau = std::nullopt;
    const auto van_out = run_suite(v, van_cfg, tasks);

    ACCEPT(crit, ice_out.error_count == 0);
    ACCEPT(crit, van_out.error_count == 0);

    int strict = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& ice_row = ice_out.rows[i];
        const auto& van_row = van_out.rows[i];
        // (a) every recorded exit crossed the threshold
        if (ice_row.exit_reason == "threshold") {
            ACCEPT(crit, ice_row.final_avg_answer_conf.has_value());
            ACCEPT(crit, *ice_row.final_avg_answer_conf >= 0.9);
        }
        // (b) call counts
        ACCEPT(crit, ice_row.predictor_calls <= van_row.predictor_calls);
        strict += ice_row.predictor_calls < van_row.predictor_calls ? 1 : 0;
    }
    ACCEPT(crit, strict >= static_cast<int>(0.9 * static_cast<double>(tasks.size())));
    // (c) accuracy within the stated band
    ACCEPT(crit, ice_out.accuracy >= van_out.accuracy - 0.02);
    ACCEPT(crit, crit.elapsed() < 60.0);
}

TEST_CASE("criterion 6: never-exit equivalence") {
    Criterion crit(6, "tau sentinel reproduces the full structured decode exactly");
    const auto& v = Vocabulary::builtin();
    const auto tasks = gen_tasks(66, 100, 2, 4);

    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        ExperimentConfig cfg = suite_config(0.2, 1.5, 2);  // sentinel > 1: never exit
        const LayoutSpec spec = make_layout_spec(cfg, DecodeRung::Ice);
        const auto set = enumerate_candidates(tasks[ti], spec, cfg.eps, v);
        const auto st0 = build_layout(v, encode_prompt(tasks[ti], v), spec);
        const OraclePredictor oracle(set, static_cast<std::size_t>(v.size()));

        const auto seed = Rng::derive(cfg.seed, ti);
        const auto ice_res = decode_ice(st0, make_decode_config(cfg, DecodeRung::Ice, seed), oracle);
        ACCEPT(crit, ice_res.phase.exit_reason == ExitReason::Exhausted);

        ExperimentConfig vcfg = cfg;
        vcfg.rung = DecodeRung::Structured;
        vcfg.tau = std::nullopt;
        const auto van_res =
            decode_vanilla(st0, make_decode_config(vcfg, DecodeRung::Structured, seed), oracle);
        ACCEPT(crit, ice_res.state.tokens == van_res.state.tokens);
    }
}

TEST_CASE("criterion 7: threshold sweep monotonicity") {
    Criterion crit(7, "mean calls non-decreasing in tau, accuracy within 0.01 band");
    const auto& v = Vocabulary::builtin();
    const auto tasks = gen_tasks(77, 200, 2, 4);
    ExperimentConfig cfg = suite_config(0.2, 0.9, 3);
    cfg.tau = std::nullopt;  // the sweep supplies tau

    const auto rows = sweep(v, cfg, SweepAxis::Tau, {"0.5", "0.7", "0.9", "0.99"}, tasks);
    double prev_calls = -1.0;
    double prev_acc = -1.0;
    for (const auto& r : rows) {
        if (r.metric == "mean_predictor_calls") {
            if (prev_calls >= 0.0) ACCEPT(crit, r.result >= prev_calls);
            prev_calls = r.result;
        }
        if (r.metric == "accuracy") {
            if (prev_acc >= 0.0) ACCEPT(crit, r.result >= prev_acc - 0.01);
            prev_acc = r.result;
        }
        if (r.metric == "error_count") ACCEPT(crit, r.result == 0.0);
    }
}

TEST_CASE("criterion 8: ablation ladder shape") {
    Criterion crit(8, "accuracy non-decreasing across rungs; early exit cuts rung-3 calls");
    const auto& v = Vocabulary::builtin();
    const auto tasks = gen_tasks(88, 200, 2, 4);
    ExperimentConfig cfg = suite_config(0.2, 0.9, 3);
    cfg.pad_variants = true;  // vanilla layouts get PAD placement ambiguity

    const auto ladder = run_ablation_ladder(v, cfg, tasks);
    REQUIRE(ladder.size() == 4);
    for (const auto& rung : ladder) ACCEPT(crit, rung.error_count == 0);
    ACCEPT(crit, ladder[0].accuracy <= ladder[1].accuracy);
    ACCEPT(crit, ladder[1].accuracy <= ladder[2].accuracy);
    ACCEPT(crit, ladder[3].mean_predictor_calls < ladder[2].mean_predictor_calls);

    std::printf("    ladder: vanilla %.3f | segment %.3f | structured %.3f | ice %.3f acc; "
                "calls %.2f -> %.2f\n",
                ladder[0].accuracy, ladder[1].accuracy, ladder[2].accuracy, ladder[3].accuracy,
                ladder[2].mean_predictor_calls, ladder[3].mean_predictor_calls);
}

TEST_CASE("criterion 9: confidence trajectory and jump categories") {
    Criterion crit(9, "0.8-anchored trajectory, 1.0 at the final digit, Numerical jumps");
    const auto& v = Vocabulary::builtin();

    // m=2: the answer marginal starts at exactly 1-eps and pins to 1.0 the
    // step after the single chain digit is revealed.
    const auto pairs = gen_tasks(99, 100, 2, 2);
    ExperimentConfig cfg2 = suite_config(0.2, 0.9, 1);
    for (std::size_t ti = 0; ti < pairs.size(); ++ti) {
        const LayoutSpec spec = make_layout_spec(cfg2, DecodeRung::Ice);
        const auto set = enumerate_candidates(pairs[ti], spec, cfg2.eps, v);
        const auto st0 = build_layout(v, encode_prompt(pairs[ti], v), spec);
        const OraclePredictor oracle(set, static_cast<std::size_t>(v.size()));
        const auto res = decode_ice(st0, make_decode_config(cfg2, DecodeRung::Ice, Rng::derive(9, ti)),
                                    oracle);

        const auto traj = confidence_trajectory(res.trace);
        ACCEPT(crit, std::abs(traj.front().second - 0.8) <= 1e-12);

        // locate the record that revealed the chain digit
        std::size_t digit_pos = 0;
        for (const Section& s : st0.sections) {
            if (s.kind == SectionKind::ThinkingSlot && s.step == 1) digit_pos = s.begin + 2;
        }
        int reveal_index = -1;
        for (std::size_t r = 0; r < res.trace.size(); ++r) {
            for (const auto& e : res.trace[r].positions) {
                if (e.pos == digit_pos && e.just_unmasked) reveal_index = static_cast<int>(r);
            }
        }
        ACCEPT(crit, reveal_index >= 0);
        for (int r = 0; r <= reveal_index; ++r) {
            ACCEPT(crit, std::abs(*res.trace[static_cast<std::size_t>(r)].avg_answer_conf - 0.8) <= 1e-12);
        }
        ACCEPT(crit, reveal_index + 1 < static_cast<int>(res.trace.size()));
        const double after = *res.trace[static_cast<std::size_t>(reveal_index + 1)].avg_answer_conf;
        ACCEPT(crit, std::abs(after - 1.0) <= 1e-12);
    }

    // jump histogram over a mixed suite: numerical tokens dominate
    const auto tasks = gen_tasks(100, 150, 2, 4);
    ExperimentConfig cfg = suite_config(0.2, 0.9, 1);
    std::vector<Trace> traces;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        const LayoutSpec spec = make_layout_spec(cfg, DecodeRung::Ice);
        const auto set = enumerate_candidates(tasks[ti], spec, cfg.eps, v);
        const auto st0 = build_layout(v, encode_prompt(tasks[ti], v), spec);
        const OraclePredictor oracle(set, static_cast<std::size_t>(v.size()));
        traces.push_back(decode_ice(st0, make_decode_config(cfg, DecodeRung::Ice, Rng::derive(10, ti)),
                                    oracle)
                             .trace);
    }
    const auto hist = jump_category_histogram(traces, 0.15, v);
    long total = 0;
    for (const auto& [cat, count] : hist) {
        (void)cat;
        total += count;
    }
    ACCEPT(crit, total > 0);
    for (const auto& [cat, count] : hist) {
        if (cat == TokenCategory::Numerical) continue;
        ACCEPT(crit, hist.at(TokenCategory::Numerical) > count);
    }
}

TEST_CASE("criterion 10: byte-identical reruns, parallel included") {
    Criterion crit(10, "run/ladder/sweep outputs identical across reruns and thread counts");
    const auto& v = Vocabulary::builtin();
    const auto tasks = gen_tasks(111, 40, 2, 4);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ice_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto emit = [&](const std::string& tag, int threads) {
        ExperimentConfig cfg = suite_config(0.2, 0.9, 2);
        cfg.threads = threads;
        const auto out = run_suite(v, cfg, tasks, (dir / ("traces_" + tag)).string());
        write_summary_csv_file((dir / ("run_" + tag + ".csv")).string(), out);

        ExperimentConfig lcfg = cfg;
        lcfg.pad_variants = true;
        const auto ladder = run_ablation_ladder(v, lcfg, tasks);
        std::ofstream lad(dir / ("ladder_" + tag + ".csv"), std::ios::binary);
        write_ladder_csv(lad, ladder);

        ExperimentConfig scfg = cfg;
        scfg.tau = std::nullopt;
        scfg.answer_len = 3;
        const auto rows = sweep(v, scfg, SweepAxis::Tau, {"0.7", "0.9"}, tasks);
        std::ofstream sw(dir / ("sweep_" + tag + ".csv"), std::ios::binary);
        write_sweep_csv(sw, rows);
    };
    emit("a", 1);
    emit("b", 1);
    emit("c", 4);

    for (const char* name : {"run", "ladder", "sweep"}) {
        const auto a = slurp(dir / (std::string(name) + "_a.csv"));
        ACCEPT(crit, a == slurp(dir / (std::string(name) + "_b.csv")));
        ACCEPT(crit, a == slurp(dir / (std::string(name) + "_c.csv")));
        ACCEPT(crit, !a.empty());
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto name = "task_" + std::to_string(i) + ".trace.jsonl";
        const auto a = slurp(dir / "traces_a" / name);
        ACCEPT(crit, a == slurp(dir / "traces_b" / name));
        ACCEPT(crit, a == slurp(dir / "traces_c" / name));
    }
    fs::remove_all(dir);
}
