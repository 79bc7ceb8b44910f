#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ice/errors.hpp"

namespace ice {

using TokenId = std::int32_t;

/// Token vocabulary with the special roles the engine relies on: a mask
/// token, a pad filler, the answer indicator, the step-template marker,
/// ten digits, chain variables, arithmetic operators and punctuation.
///
/// The builtin synthetic vocabulary has exactly 24 tokens with dense ids.
/// MASK deliberately sits at the highest index so that an argmax tie over a
/// flat distribution resolves to PAD (id 0) and never resurrects a mask.
class Vocabulary {
public:
    Vocabulary(std::vector<std::string> symbols,
               TokenId mask, TokenId pad, TokenId ans, TokenId step,
               TokenId digit0, TokenId var0, int n_vars,
               TokenId plus, TokenId minus, TokenId times,
               TokenId eq, TokenId semi, TokenId query)
        : symbols_(std::move(symbols)),
          mask_(mask), pad_(pad), ans_(ans), step_(step),
          digit0_(digit0), var0_(var0), n_vars_(n_vars),
          plus_(plus), minus_(minus), times_(times),
          eq_(eq), semi_(semi), query_(query) {
        const auto n = static_cast<TokenId>(symbols_.size());
        for (TokenId t : {mask_, pad_, ans_, step_, digit0_, var0_, plus_, minus_, times_, eq_, semi_, query_}) {
            if (t < 0 || t >= n) {
                throw InvalidInputError("vocabulary role index out of range");
            }
        }
        if (digit0_ + 9 >= n || var0_ + n_vars_ - 1 >= n || n_vars_ < 1) {
            throw InvalidInputError("vocabulary role span out of range");
        }
    }

    static const Vocabulary& builtin() {
        static const Vocabulary v = make_builtin();
        return v;
    }

    int size() const { return static_cast<int>(symbols_.size()); }

    const std::string& symbol(TokenId t) const { return symbols_.at(static_cast<std::size_t>(t)); }

    TokenId mask_token() const { return mask_; }
    TokenId pad_token() const { return pad_; }
    TokenId ans_token() const { return ans_; }
    TokenId step_token() const { return step_; }

    TokenId digit(int d) const {
        if (d < 0 || d > 9) throw InvalidInputError("digit out of range");
        return digit0_ + d;
    }
    bool is_digit(TokenId t) const { return t >= digit0_ && t < digit0_ + 10; }
    int digit_value(TokenId t) const {
        if (!is_digit(t)) throw InvalidInputError("token is not a digit");
        return static_cast<int>(t - digit0_);
    }

    TokenId var(int i) const {
        if (i < 0 || i >= n_vars_) throw InvalidInputError("variable index out of range");
        return var0_ + i;
    }
    int n_vars() const { return n_vars_; }
    bool is_var(TokenId t) const { return t >= var0_ && t < var0_ + n_vars_; }

    TokenId op_token(char op) const {
        switch (op) {
            case '+': return plus_;
            case '-': return minus_;
            case '*': return times_;
            default: throw InvalidInputError(std::string("unknown operator: ") + op);
        }
    }
    bool is_op(TokenId t) const { return t == plus_ || t == minus_ || t == times_; }

    TokenId eq_token() const { return eq_; }
    TokenId semi_token() const { return semi_; }
    TokenId query_token() const { return query_; }
    bool is_punct(TokenId t) const { return t == eq_ || t == semi_ || t == query_; }

private:
    static Vocabulary make_builtin() {
        std::vector<std::string> syms = {"<pad>", "<ans>", "<step>"};
        for (int d = 0; d <= 9; ++d) syms.push_back(std::string(1, static_cast<char>('0' + d)));
        for (int i = 0; i < 4; ++i) syms.push_back(std::string(1, static_cast<char>('a' + i)));
        syms.insert(syms.end(), {"+", "-", "*", "=", ";", "?", "<mask>"});
        return Vocabulary(std::move(syms),
                          /*mask=*/23, /*pad=*/0, /*ans=*/1, /*step=*/2,
                          /*digit0=*/3, /*var0=*/13, /*n_vars=*/4,
                          /*plus=*/17, /*minus=*/18, /*times=*/19,
                          /*eq=*/20, /*semi=*/21, /*query=*/22);
    }

    std::vector<std::string> symbols_;
    TokenId mask_, pad_, ans_, step_;
    TokenId digit0_, var0_;
    int n_vars_;
    TokenId plus_, minus_, times_;
    TokenId eq_, semi_, query_;
};

} // namespace ice
