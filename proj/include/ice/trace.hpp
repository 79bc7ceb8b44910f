#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ice/errors.hpp"
#include "ice/layout.hpp"
#include "ice/vocab.hpp"

namespace ice {

enum class Phase { Reasoning, AnswerGeneration };

inline const char* to_string(Phase p) {
    return p == Phase::Reasoning ? "reasoning" : "answer_generation";
}

inline Phase phase_from_string(const std::string& s) {
    if (s == "reasoning") return Phase::Reasoning;
    if (s == "answer_generation") return Phase::AnswerGeneration;
    throw InvalidInputError("unknown phase: " + s);
}

/// One refinement step of a decode. `avg_answer_conf` and the per-position
/// confidences come from the predictor output computed at this step, i.e.
/// before this step's unmasking; `just_unmasked` marks the positions this
/// step's transition revealed. A confidence rise observed at some record was
/// therefore caused by the unmasking stored in the record before it.
struct TraceRecord {
    struct PositionEntry {
        std::size_t pos = 0;
        SectionKind section = SectionKind::Prompt;
        int section_step = 0;
        TokenId token = 0;
        double confidence = 0.0;
        bool just_unmasked = false;
    };

    int step = 0;
    Phase phase = Phase::Reasoning;
    std::optional<double> avg_answer_conf;
    std::vector<PositionEntry> positions;
    int predictor_calls_cum = 0;
};

using Trace = std::vector<TraceRecord>;

struct TraceOptions {
    /// When false, only the just-unmasked positions are captured per record,
    /// which bounds trace size on long decodes.
    bool capture_positions = true;
};

enum class TokenCategory { Numerical, Operator, Punctuation, Identifier, Template, Other };

inline const char* to_string(TokenCategory c) {
    switch (c) {
        case TokenCategory::Numerical: return "numerical";
        case TokenCategory::Operator: return "operator";
        case TokenCategory::Punctuation: return "punctuation";
        case TokenCategory::Identifier: return "identifier";
        case TokenCategory::Template: return "template";
        case TokenCategory::Other: return "other";
    }
    return "?";
}

inline constexpr TokenCategory kAllCategories[] = {
    TokenCategory::Numerical, TokenCategory::Operator,  TokenCategory::Punctuation,
    TokenCategory::Identifier, TokenCategory::Template, TokenCategory::Other,
};

/// Total classification of the vocabulary.
inline TokenCategory classify_token(const Vocabulary& vocab, TokenId t) {
    if (vocab.is_digit(t)) return TokenCategory::Numerical;
    if (vocab.is_op(t)) return TokenCategory::Operator;
    if (vocab.is_punct(t)) return TokenCategory::Punctuation;
    if (vocab.is_var(t)) return TokenCategory::Identifier;
    if (t == vocab.step_token() || t == vocab.ans_token() || t == vocab.pad_token()) {
        return TokenCategory::Template;
    }
    return TokenCategory::Other;
}

// --- analysis ---------------------------------------------------------

/// Ordered (step, avg answer confidence) projection over records that carry
/// a defined confidence.
inline std::vector<std::pair<int, double>> confidence_trajectory(const Trace& trace) {
    if (trace.empty()) throw PreconditionError("confidence_trajectory needs a non-empty trace");
    std::vector<std::pair<int, double>> out;
    for (const TraceRecord& r : trace) {
        if (r.avg_answer_conf) out.emplace_back(r.step, *r.avg_answer_conf);
    }
    return out;
}

struct ConfidenceJump {
    int step = 0;       // step of the record where the raised confidence shows up
    double delta = 0.0;
    std::vector<std::pair<TokenId, TokenCategory>> tokens;  // unmasked entering the jump
};

/// Steps whose avg answer confidence rose by at least `delta` relative to
/// the previous record, paired with the tokens whose unmasking produced the
/// rise (the previous record's reveals).
inline std::vector<ConfidenceJump> confidence_jumps(const Trace& trace, double delta,
                                                    const Vocabulary& vocab) {
    if (delta <= 0.0) throw PreconditionError("jump threshold must be positive");
    std::vector<ConfidenceJump> jumps;
    const TraceRecord* prev = nullptr;
    for (const TraceRecord& r : trace) {
        if (!r.avg_answer_conf) continue;
        if (prev) {
            const double d = *r.avg_answer_conf - *prev->avg_answer_conf;
            if (d >= delta) {
                ConfidenceJump j;
                j.step = r.step;
                j.delta = d;
                for (const auto& e : prev->positions) {
                    if (e.just_unmasked) j.tokens.emplace_back(e.token, classify_token(vocab, e.token));
                }
                jumps.push_back(std::move(j));
            }
        }
        prev = &r;
    }
    return jumps;
}

using CategoryHistogram = std::map<TokenCategory, long>;

inline CategoryHistogram empty_histogram() {
    CategoryHistogram h;
    for (TokenCategory c : kAllCategories) h[c] = 0;
    return h;
}

/// Aggregate category counts of tokens unmasked at jump steps, over a
/// collection of traces. An empty collection yields the all-zero histogram.
inline CategoryHistogram jump_category_histogram(std::span<const Trace> traces, double delta,
                                                 const Vocabulary& vocab) {
    CategoryHistogram hist = empty_histogram();
    for (const Trace& t : traces) {
        for (const ConfidenceJump& j : confidence_jumps(t, delta, vocab)) {
            for (const auto& [token, cat] : j.tokens) {
                (void)token;
                ++hist[cat];
            }
        }
    }
    return hist;
}

// --- serialization ----------------------------------------------------

inline std::string section_tag(SectionKind kind, int step) {
    std::string s = to_string(kind);
    if (kind == SectionKind::ThinkingTemplate || kind == SectionKind::ThinkingSlot) {
        s += ":" + std::to_string(step);
    }
    return s;
}

inline std::pair<SectionKind, int> parse_section_tag(const std::string& tag) {
    const auto colon = tag.find(':');
    const std::string name = tag.substr(0, colon);
    const int step = colon == std::string::npos ? 0 : std::stoi(tag.substr(colon + 1));
    for (SectionKind k : {SectionKind::Prompt, SectionKind::ThinkingTemplate, SectionKind::ThinkingSlot,
                          SectionKind::Indicator, SectionKind::Answer}) {
        if (name == to_string(k)) return {k, step};
    }
    throw InvalidInputError("unknown section tag: " + tag);
}

inline nlohmann::json record_to_json(const TraceRecord& r) {
    nlohmann::json positions = nlohmann::json::array();
    for (const auto& e : r.positions) {
        positions.push_back({{"pos", e.pos},
                             {"section", section_tag(e.section, e.section_step)},
                             {"token", e.token},
                             {"confidence", e.confidence},
                             {"just_unmasked", e.just_unmasked}});
    }
    nlohmann::json j = {{"step", r.step},
                        {"phase", to_string(r.phase)},
                        {"avg_answer_conf", nullptr},
                        {"positions", std::move(positions)},
                        {"predictor_calls_cum", r.predictor_calls_cum}};
    if (r.avg_answer_conf) j["avg_answer_conf"] = *r.avg_answer_conf;
    return j;
}

inline TraceRecord record_from_json(const nlohmann::json& j) {
    TraceRecord r;
    r.step = j.at("step").get<int>();
    r.phase = phase_from_string(j.at("phase").get<std::string>());
    if (!j.at("avg_answer_conf").is_null()) r.avg_answer_conf = j.at("avg_answer_conf").get<double>();
    r.predictor_calls_cum = j.at("predictor_calls_cum").get<int>();
    for (const auto& p : j.at("positions")) {
        TraceRecord::PositionEntry e;
        e.pos = p.at("pos").get<std::size_t>();
        const auto [kind, step] = parse_section_tag(p.at("section").get<std::string>());
        e.section = kind;
        e.section_step = step;
        e.token = p.at("token").get<TokenId>();
        e.confidence = p.at("confidence").get<double>();
        e.just_unmasked = p.at("just_unmasked").get<bool>();
        r.positions.push_back(std::move(e));
    }
    return r;
}

/// Newline-delimited records, one JSON object per line.
inline void write_trace_jsonl(std::ostream& os, const Trace& trace) {
    for (const TraceRecord& r : trace) os << record_to_json(r).dump() << '\n';
}

inline Trace read_trace_jsonl(std::istream& is) {
    Trace trace;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        trace.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return trace;
}

// --- CSV exports ------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trace& trace) {
    os << "step,avg_answer_conf\n";
    for (const auto& [step, conf] : confidence_trajectory(trace)) {
        os << step << ',' << format_double(conf) << '\n';
    }
}

inline void write_histogram_csv(std::ostream& os, const CategoryHistogram& hist) {
    os << "category,count\n";
    for (TokenCategory c : kAllCategories) {
        const auto it = hist.find(c);
        os << to_string(c) << ',' << (it == hist.end() ? 0 : it->second) << '\n';
    }
}

} // namespace ice
