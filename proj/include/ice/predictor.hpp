#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ice/errors.hpp"
#include "ice/layout.hpp"

namespace ice {

/// Per-position probability distributions over the clean sequence.
class PredictorOutput {
public:
    PredictorOutput(std::size_t length, std::size_t vocab_size)
        : length_(length), vocab_(vocab_size), probs_(length * vocab_size, 0.0) {}

    std::size_t length() const { return length_; }
    std::size_t vocab_size() const { return vocab_; }

    std::span<double> row(std::size_t i) { return {probs_.data() + i * vocab_, vocab_}; }
    std::span<const double> row(std::size_t i) const { return {probs_.data() + i * vocab_, vocab_}; }

    /// Every position must hold a nonnegative vector summing to 1 within 1e-9.
    void validate() const {
        for (std::size_t i = 0; i < length_; ++i) {
            double sum = 0.0;
            for (double p : row(i)) {
                if (p < 0.0) throw InvalidInputError("negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw InvalidInputError("position distribution does not sum to 1");
            }
        }
    }

private:
    std::size_t length_;
    std::size_t vocab_;
    std::vector<double> probs_;
};

/// Bidirectional predictor contract: given a partially masked state, return
/// a distribution over the clean token at every position. Implementations
/// are read-only after construction and safe for concurrent predict calls.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual PredictorOutput predict(const SequenceState& state) const = 0;
};

/// Baseline that spreads probability 1/|V| over the whole vocabulary at
/// every position, regardless of the state.
class UniformPredictor final : public Predictor {
public:
    explicit UniformPredictor(std::size_t vocab_size) : vocab_(vocab_size) {}

    PredictorOutput predict(const SequenceState& state) const override {
        PredictorOutput out(state.size(), vocab_);
        const double p = 1.0 / static_cast<double>(vocab_);
        for (std::size_t i = 0; i < state.size(); ++i) {
            for (double& cell : out.row(i)) cell = p;
        }
        return out;
    }

private:
    std::size_t vocab_;
};

} // namespace ice
