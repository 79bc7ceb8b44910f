#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ice/errors.hpp"
#include "ice/layout.hpp"
#include "ice/predictor.hpp"
#include "ice/rng.hpp"
#include "ice/vocab.hpp"

namespace ice {

/// Retention schedule alpha(t): probability a token survives corruption at
/// time t. Linear means alpha(t) = 1 - t exactly, so alpha(0)=1, alpha(1)=0.
struct NoiseSchedule {
    enum class Kind { Linear };
    Kind kind = Kind::Linear;

    double alpha(double t) const { return 1.0 - t; }
};

/// Forward process: independently replace each token of a clean sequence by
/// MASK with probability 1 - alpha(t). Deterministic for a given seed.
inline SequenceState corrupt(const SequenceState& clean, double t, const NoiseSchedule& schedule,
                             std::uint64_t rng_seed, const Vocabulary& vocab) {
    if (t < 0.0 || t > 1.0) throw DomainError("corruption time must lie in [0,1]");
    for (std::size_t i = 0; i < clean.size(); ++i) {
        if (clean.is_masked(i) || clean.tokens[i] == vocab.mask_token()) {
            throw InvalidInputError("corrupt expects a clean, MASK-free sequence");
        }
    }
    const double p_mask = 1.0 - schedule.alpha(t);
    Rng rng(rng_seed);
    SequenceState out = clean;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (rng.next_double() < p_mask) {
            out.tokens[i] = vocab.mask_token();
            out.masked[i] = 1;
        }
    }
    return out;
}

struct NelboResult {
    double estimate = 0.0;
    double std_error = 0.0;
    int n_samples = 0;
};

/// Monte-Carlo estimate of the masked-diffusion NELBO in nats:
/// E over t of (1/t) * sum over masked k of -log f(x0_k | x_t).
///
/// t is drawn from U[t_min, 1) instead of U[0, 1); the 1/t weight makes the
/// raw estimator's variance blow up near zero and the truncation leaves the
/// expectation unchanged for per-position losses that do not depend on t.
/// A predictor that puts zero mass on a true token yields +infinity, which
/// is reported rather than thrown.
inline NelboResult nelbo_estimate(const Predictor& predictor, const SequenceState& x0,
                                  int n_samples, std::uint64_t rng_seed, const Vocabulary& vocab,
                                  const NoiseSchedule& schedule = {}, double t_min = 1e-3) {
    if (n_samples < 1) throw PreconditionError("nelbo_estimate needs n_samples >= 1");

    Rng rng(rng_seed);
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        const double t = t_min + rng.next_double() * (1.0 - t_min);
        const SequenceState xt = corrupt(x0, t, schedule, rng.next_u64(), vocab);
        const PredictorOutput out = predictor.predict(xt);
        double loss = 0.0;
        for (std::size_t k = 0; k < xt.size(); ++k) {
            if (!xt.is_masked(k)) continue;
            const double p = out.row(k)[static_cast<std::size_t>(x0.tokens[k])];
            loss += p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
        }
        samples.push_back(loss / t);
    }

    NelboResult res;
    res.n_samples = n_samples;
    double sum = 0.0;
    for (double v : samples) sum += v;
    res.estimate = sum / n_samples;
    if (n_samples > 1 && std::isfinite(res.estimate)) {
        double var = 0.0;
        for (double v : samples) {
            const double d = v - res.estimate;
            var += d * d;
        }
        var /= static_cast<double>(n_samples - 1);
        res.std_error = std::sqrt(var / n_samples);
    }
    return res;
}

} // namespace ice
