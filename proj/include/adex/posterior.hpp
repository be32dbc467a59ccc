#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <vector>

#include "adex/errors.hpp"
#include "adex/rng.hpp"

namespace adex {

// One arm of a K-armed experiment, indexed 1..K.
struct ArmId {
    int index = 0;
    friend auto operator<=>(const ArmId&, const ArmId&) = default;
};

// Binary reward: clicked (1) or not (0).
using Reward = bool;

// Beta posterior over one arm's success probability. alpha counts successes,
// beta counts failures, both offset by the prior pseudo-counts; both stay
// strictly positive.
struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;

    friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

inline void validate(const BetaParams& p) {
    if (!(p.alpha > 0.0) || !(p.beta > 0.0) ||
        !std::isfinite(p.alpha) || !std::isfinite(p.beta)) {
        throw ValidationError("invalid-posterior",
                              "Beta parameters must be positive finite reals");
    }
}

// K identical priors, one per arm. Default is the flat Beta(1,1).
inline std::vector<BetaParams> init_prior(int num_arms, double alpha0 = 1.0,
                                          double beta0 = 1.0) {
    if (num_arms < 2) {
        throw ValidationError("invalid-arm-count",
                              "an experiment needs at least two arms");
    }
    BetaParams prior{alpha0, beta0};
    validate(prior);
    return std::vector<BetaParams>(static_cast<std::size_t>(num_arms), prior);
}

// Conjugate update for one observed binary reward on the chosen arm:
// success bumps alpha, failure bumps beta.
inline BetaParams update(BetaParams params, Reward reward) {
    validate(params);
    if (reward) {
        params.alpha += 1.0;
    } else {
        params.beta += 1.0;
    }
    return params;
}

// Order-free aggregate of `update`: fold a whole batch of outcomes at once.
inline BetaParams batch_fold(BetaParams params, std::int64_t successes,
                             std::int64_t failures) {
    validate(params);
    if (successes < 0 || failures < 0) {
        throw ValidationError("invalid-counts",
                              "success/failure counts must be non-negative");
    }
    params.alpha += static_cast<double>(successes);
    params.beta += static_cast<double>(failures);
    return params;
}

inline double posterior_mean(const BetaParams& params) {
    validate(params);
    return params.alpha / (params.alpha + params.beta);
}

// One posterior draw. Deterministic given the rng state.
inline double sample(const BetaParams& params, Rng& rng) {
    validate(params);
    return rng.beta(params.alpha, params.beta);
}

}  // namespace adex
