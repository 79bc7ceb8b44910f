#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ice/errors.hpp"
#include "ice/rng.hpp"
#include "ice/vocab.hpp"

namespace ice {

/// Chained modular-arithmetic task: m assignment steps over digits 0-9,
/// all arithmetic mod 10. Encoded as
///   a = d0 ; b = a op1 d1 ; ... ; var ?
/// Variable names cycle through the vocabulary's variable tokens, so chains
/// longer than the variable set reassign earlier names.
struct ChainArithTask {
    struct Step {
        char op;      // '+', '-' or '*'
        int operand;  // 0-9
    };

    int m = 2;            // assignment steps, 2..6
    int first_value = 0;  // d0
    std::vector<Step> steps;  // m-1 entries

    void validate() const {
        if (m < 2 || m > 6) throw InvalidInputError("m must be in [2,6]");
        if (first_value < 0 || first_value > 9) throw InvalidInputError("d0 must be a digit");
        if (static_cast<int>(steps.size()) != m - 1) {
            throw InvalidInputError("task needs m-1 steps");
        }
        for (const Step& s : steps) {
            if (s.op != '+' && s.op != '-' && s.op != '*') {
                throw InvalidInputError("unknown operator in task");
            }
            if (s.operand < 0 || s.operand > 9) throw InvalidInputError("operand must be a digit");
        }
    }

    static int apply_op(int lhs, char op, int rhs) {
        int v = 0;
        switch (op) {
            case '+': v = lhs + rhs; break;
            case '-': v = lhs - rhs; break;
            case '*': v = lhs * rhs; break;
            default: throw InvalidInputError("unknown operator");
        }
        return ((v % 10) + 10) % 10;
    }

    /// v_0 .. v_{m-1} of the error-free chain.
    std::vector<int> chain_values() const {
        std::vector<int> vals;
        vals.reserve(static_cast<std::size_t>(m));
        vals.push_back(first_value);
        for (const Step& s : steps) vals.push_back(apply_op(vals.back(), s.op, s.operand));
        return vals;
    }

    int true_answer() const { return chain_values().back(); }
};

inline TokenId task_var_token(const Vocabulary& vocab, int index) {
    return vocab.var(index % vocab.n_vars());
}

/// Prompt encoding: `a = d0 ;` then `var_i = var_{i-1} op_i d_i ;` per step,
/// closed by `var_{m-1} ?`.
inline std::vector<TokenId> encode_prompt(const ChainArithTask& task, const Vocabulary& vocab) {
    task.validate();
    std::vector<TokenId> out;
    out.push_back(task_var_token(vocab, 0));
    out.push_back(vocab.eq_token());
    out.push_back(vocab.digit(task.first_value));
    out.push_back(vocab.semi_token());
    for (int i = 1; i < task.m; ++i) {
        const auto& s = task.steps[static_cast<std::size_t>(i - 1)];
        out.push_back(task_var_token(vocab, i));
        out.push_back(vocab.eq_token());
        out.push_back(task_var_token(vocab, i - 1));
        out.push_back(vocab.op_token(s.op));
        out.push_back(vocab.digit(s.operand));
        out.push_back(vocab.semi_token());
    }
    out.push_back(task_var_token(vocab, task.m - 1));
    out.push_back(vocab.query_token());
    return out;
}

/// Task-file line format: `m;d0;op1,d1;op2,d2;...`
inline std::string format_task(const ChainArithTask& task) {
    std::ostringstream os;
    os << task.m << ';' << task.first_value;
    for (const auto& s : task.steps) os << ';' << s.op << ',' << s.operand;
    return os.str();
}

inline ChainArithTask parse_task(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ';') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    if (fields.size() < 3) throw InvalidInputError("task line needs m, d0 and at least one step: " + line);

    ChainArithTask task;
    try {
        task.m = std::stoi(fields[0]);
        task.first_value = std::stoi(fields[1]);
    } catch (const std::exception&) {
        throw InvalidInputError("bad numeric field in task line: " + line);
    }
    for (std::size_t i = 2; i < fields.size(); ++i) {
        const std::string& f = fields[i];
        auto comma = f.find(',');
        if (f.size() < 3 || comma != 1) throw InvalidInputError("bad step field in task line: " + line);
        ChainArithTask::Step s;
        s.op = f[0];
        try {
            s.operand = std::stoi(f.substr(comma + 1));
        } catch (const std::exception&) {
            throw InvalidInputError("bad operand in task line: " + line);
        }
        task.steps.push_back(s);
    }
    task.validate();
    return task;
}

inline void write_task_file(const std::string& path, const std::vector<ChainArithTask>& tasks) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open task file for writing: " + path);
    for (const auto& t : tasks) os << format_task(t) << '\n';
    if (!os) throw IoError("failed writing task file: " + path);
}

inline std::vector<ChainArithTask> read_task_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open task file: " + path);
    std::vector<ChainArithTask> tasks;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        tasks.push_back(parse_task(line));
    }
    return tasks;
}

/// Sample n tasks with m uniform in [m_min, m_max], digits and operators
/// uniform. Byte-deterministic for a given seed.
inline std::vector<ChainArithTask> gen_tasks(std::uint64_t seed, int n, int m_min, int m_max) {
    if (n < 1) throw PreconditionError("task count must be >= 1");
    if (m_min < 2 || m_max > 6 || m_min > m_max) throw PreconditionError("m range must lie in [2,6]");
    static constexpr char kOps[] = {'+', '-', '*'};
    Rng rng(seed);
    std::vector<ChainArithTask> tasks;
    tasks.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ChainArithTask t;
        t.m = m_min + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m_max - m_min + 1)));
        t.first_value = static_cast<int>(rng.next_below(10));
        for (int s = 1; s < t.m; ++s) {
            ChainArithTask::Step step;
            step.op = kOps[rng.next_below(3)];
            step.operand = static_cast<int>(rng.next_below(10));
            t.steps.push_back(step);
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

} // namespace ice
