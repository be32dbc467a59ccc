#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adex/errors.hpp"
#include "adex/posterior.hpp"
#include "adex/rng.hpp"

namespace adex {

enum class PolicyKind { Uniform, ThompsonSampling, HybridEpsilonTS };

enum class AllocationSource { UniformArm, TSArm };

inline std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::Uniform: return "uniform";
        case PolicyKind::ThompsonSampling: return "ts";
        case PolicyKind::HybridEpsilonTS: return "hybrid";
    }
    return "?";
}

inline std::string to_string(AllocationSource s) {
    return s == AllocationSource::UniformArm ? "uniform" : "ts";
}

// Arm-selection policy. epsilon and share_uniform_data are meaningful only
// for the hybrid: with probability epsilon an assignment is made uniformly
// at random, otherwise by Thompson sampling; share_uniform_data controls
// whether rewards earned on uniform assignments feed the sampling posterior.
struct AllocationPolicy {
    PolicyKind kind = PolicyKind::Uniform;
    double epsilon = 0.0;
    bool share_uniform_data = false;

    static AllocationPolicy uniform() { return {PolicyKind::Uniform, 0.0, false}; }
    static AllocationPolicy thompson() {
        return {PolicyKind::ThompsonSampling, 0.0, false};
    }
    static AllocationPolicy hybrid(double epsilon, bool share_uniform_data) {
        return {PolicyKind::HybridEpsilonTS, epsilon, share_uniform_data};
    }

    // Whether uniform-source rewards are visible to the posterior. A pure
    // uniform experiment folds all of its own data; a hybrid folds the
    // uniform branch only when sharing is on.
    bool uses_uniform_rewards() const {
        return kind == PolicyKind::Uniform ||
               (kind == PolicyKind::HybridEpsilonTS && share_uniform_data);
    }

    void validate() const {
        if (kind == PolicyKind::HybridEpsilonTS) {
            if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
                throw ValidationError("invalid-epsilon",
                                      "hybrid epsilon must lie strictly in (0,1)");
            }
        }
    }

    friend bool operator==(const AllocationPolicy&, const AllocationPolicy&) = default;
};

inline AllocationPolicy parse_policy(const std::string& name, double epsilon = 0.5,
                                     bool share_uniform_data = false) {
    if (name == "uniform") return AllocationPolicy::uniform();
    if (name == "ts") return AllocationPolicy::thompson();
    if (name == "hybrid") {
        auto p = AllocationPolicy::hybrid(epsilon, share_uniform_data);
        p.validate();
        return p;
    }
    throw ValidationError("invalid-policy",
                          "unknown policy '" + name + "' (expected uniform|ts|hybrid)");
}

// Each arm with probability 1/K.
inline ArmId uniform_select(int num_arms, Rng& rng) {
    if (num_arms < 2) {
        throw ValidationError("invalid-arm-count",
                              "uniform selection needs at least two arms");
    }
    return ArmId{static_cast<int>(rng.next_below(static_cast<std::uint64_t>(num_arms))) + 1};
}

// Thompson sampling: one posterior draw per arm, pick the largest. Ties go
// to the lowest index (a measure-zero event).
inline ArmId ts_select(const std::vector<BetaParams>& posteriors, Rng& rng) {
    if (posteriors.size() < 2) {
        throw ValidationError("invalid-arm-count",
                              "Thompson selection needs at least two arms");
    }
    int best = 0;
    double best_value = sample(posteriors[0], rng);
    for (std::size_t k = 1; k < posteriors.size(); ++k) {
        const double v = sample(posteriors[k], rng);
        if (v > best_value) {
            best_value = v;
            best = static_cast<int>(k);
        }
    }
    return ArmId{best + 1};
}

struct Assignment {
    ArmId arm;
    AllocationSource source = AllocationSource::UniformArm;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Epsilon hybrid: the coin comes first, from the same stream, before any
// arm sampling, so a run is reproducible from the seed alone.
inline Assignment hybrid_select(const std::vector<BetaParams>& posteriors,
                                double epsilon, Rng& rng) {
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
        throw ValidationError("invalid-epsilon",
                              "hybrid epsilon must lie strictly in (0,1)");
    }
    if (rng.bernoulli(epsilon)) {
        return {uniform_select(static_cast<int>(posteriors.size()), rng),
                AllocationSource::UniformArm};
    }
    return {ts_select(posteriors, rng), AllocationSource::TSArm};
}

// Monte-Carlo estimate of each arm's probability of having the largest mean.
// Integer credits partition the draws exactly; probs() divides through.
struct ProbOptimal {
    std::vector<std::int64_t> credits;
    std::int64_t draws = 0;

    std::vector<double> probs() const {
        std::vector<double> out(credits.size());
        for (std::size_t k = 0; k < credits.size(); ++k) {
            out[k] = static_cast<double>(credits[k]) / static_cast<double>(draws);
        }
        return out;
    }
};

inline ProbOptimal prob_optimal(const std::vector<BetaParams>& posteriors,
                                std::int64_t draws, Rng& rng) {
    if (posteriors.size() < 2) {
        throw ValidationError("invalid-arm-count",
                              "prob_optimal needs at least two arms");
    }
    if (draws < 1) {
        throw ValidationError("invalid-draws",
                              "prob_optimal needs at least one draw");
    }
    for (const auto& p : posteriors) validate(p);

    ProbOptimal result;
    result.credits.assign(posteriors.size(), 0);
    result.draws = draws;
    const std::size_t num_arms = posteriors.size();
    for (std::int64_t i = 0; i < draws; ++i) {
        std::size_t best = 0;
        double best_value = rng.beta(posteriors[0].alpha, posteriors[0].beta);
        for (std::size_t k = 1; k < num_arms; ++k) {
            const double v = rng.beta(posteriors[k].alpha, posteriors[k].beta);
            if (v > best_value) {
                best_value = v;
                best = k;
            }
        }
        ++result.credits[best];
    }
    return result;
}

constexpr std::int64_t kDefaultProbOptimalDraws = 1'000'000;

inline ProbOptimal prob_optimal(const std::vector<BetaParams>& posteriors, Rng& rng) {
    return prob_optimal(posteriors, kDefaultProbOptimalDraws, rng);
}

// n independent selections against the same frozen posterior snapshot. The
// posterior is read-only here: batches update it only when they close.
inline std::vector<Assignment> assign_batch(const std::vector<BetaParams>& posteriors,
                                            const AllocationPolicy& policy, int n,
                                            Rng& rng) {
    if (n < 0) {
        throw ValidationError("invalid-batch-size", "batch size must be non-negative");
    }
    policy.validate();
    const int num_arms = static_cast<int>(posteriors.size());
    std::vector<Assignment> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        switch (policy.kind) {
            case PolicyKind::Uniform:
                out.push_back({uniform_select(num_arms, rng), AllocationSource::UniformArm});
                break;
            case PolicyKind::ThompsonSampling:
                out.push_back({ts_select(posteriors, rng), AllocationSource::TSArm});
                break;
            case PolicyKind::HybridEpsilonTS:
                out.push_back(hybrid_select(posteriors, policy.epsilon, rng));
                break;
        }
    }
    return out;
}

}  // namespace adex
