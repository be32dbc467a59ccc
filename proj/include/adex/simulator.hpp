#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adex/engine.hpp"

namespace adex {

// A synthetic population: one true click probability per arm.
struct Environment {
    std::vector<double> click_probs;

    int num_arms() const { return static_cast<int>(click_probs.size()); }

    double best_prob() const {
        double best = 0.0;
        for (double p : click_probs) best = std::max(best, p);
        return best;
    }

    void validate() const {
        if (click_probs.size() < 2) {
            throw ValidationError("invalid-arm-count",
                                  "an environment needs at least two arms");
        }
        for (double p : click_probs) {
            if (!(p >= 0.0) || !(p <= 1.0)) {
                throw ValidationError("invalid-click-prob",
                                      "click probabilities must lie in [0,1]");
            }
        }
    }
};

// Per-arm view of one batch: counts are for that batch alone, the click
// rate is cumulative through the batch over both allocation sources, and
// pa is the arm's probability of being optimal under the posterior that
// includes this batch's rewards (the probability governing the next batch).
struct TrajectoryArmRow {
    int arm = 0;
    std::int64_t assigned = 0;
    std::int64_t assigned_uniform = 0;
    std::int64_t assigned_ts = 0;
    std::int64_t clicked = 0;
    std::optional<double> ccr;
    double pa = 0.0;

    friend bool operator==(const TrajectoryArmRow&, const TrajectoryArmRow&) = default;
};

struct TrajectoryBatch {
    int batch = 0;
    std::vector<TrajectoryArmRow> arms;

    friend bool operator==(const TrajectoryBatch&, const TrajectoryBatch&) = default;
};

struct Trajectory {
    std::uint64_t experiment_seed = 0;
    AllocationPolicy policy;
    std::vector<TrajectoryBatch> batches;

    // Arm with the highest final-batch optimality probability, lowest
    // index on ties; 0 when the trajectory is empty.
    int favored_arm() const {
        if (batches.empty()) return 0;
        const auto& last = batches.back().arms;
        int best = 1;
        for (const auto& row : last) {
            if (row.pa > last[static_cast<std::size_t>(best - 1)].pa) best = row.arm;
        }
        return best;
    }

    double max_final_pa() const {
        if (batches.empty()) return 0.0;
        double best = 0.0;
        for (const auto& row : batches.back().arms) best = std::max(best, row.pa);
        return best;
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Rebuilds the batch-by-batch view from an experiment's full record log.
// Optimality probabilities for the posterior after batch b are drawn from
// the stream derived as (experiment seed, 16 + b), matching the engine's
// own readouts, so an export and a live status query agree.
inline Trajectory build_trajectory(const ExperimentConfig& config,
                                   const std::vector<AssignmentRecord>& records,
                                   int batches_completed,
                                   std::uint64_t experiment_seed,
                                   std::int64_t pa_draws) {
    Trajectory out;
    out.experiment_seed = experiment_seed;
    out.policy = config.policy;

    const auto num_arms = static_cast<std::size_t>(config.num_arms());
    auto posteriors = init_prior(config.num_arms(), config.alpha0, config.beta0);
    std::vector<std::int64_t> cumulative_assigned(num_arms, 0);
    std::vector<std::int64_t> cumulative_clicked(num_arms, 0);

    for (int b = 1; b <= batches_completed; ++b) {
        TrajectoryBatch tb;
        tb.batch = b;
        tb.arms.resize(num_arms);
        for (std::size_t k = 0; k < num_arms; ++k) tb.arms[k].arm = static_cast<int>(k + 1);

        for (const auto& rec : records) {
            if (rec.batch != b) continue;
            auto& row = tb.arms[static_cast<std::size_t>(rec.arm.index - 1)];
            row.assigned += 1;
            if (rec.source == AllocationSource::UniformArm) {
                row.assigned_uniform += 1;
            } else {
                row.assigned_ts += 1;
            }
            if (rec.reward.value()) row.clicked += 1;
        }

        fold_completed_batch(posteriors, records, b, config.policy);
        Rng pa_rng(derive_seed(experiment_seed, 16 + static_cast<std::uint64_t>(b)));
        auto pa = prob_optimal(posteriors, pa_draws, pa_rng).probs();

        for (std::size_t k = 0; k < num_arms; ++k) {
            cumulative_assigned[k] += tb.arms[k].assigned;
            cumulative_clicked[k] += tb.arms[k].clicked;
            if (cumulative_assigned[k] > 0) {
                tb.arms[k].ccr = static_cast<double>(cumulative_clicked[k]) /
                                 static_cast<double>(cumulative_assigned[k]);
            }
            tb.arms[k].pa = pa[k];
        }
        out.batches.push_back(std::move(tb));
    }
    return out;
}

// Expected per-assignment shortfall against the best arm, summed over all
// assignments; uses true click probabilities, not realized clicks.
inline double cumulative_regret(const std::vector<AssignmentRecord>& records,
                                const Environment& env) {
    const double best = env.best_prob();
    double regret = 0.0;
    for (const auto& rec : records) {
        regret += best - env.click_probs[static_cast<std::size_t>(rec.arm.index - 1)];
    }
    return regret;
}

struct SimulateOptions {
    std::int64_t pa_draws = 100000;
    double alpha0 = 1.0;
    double beta0 = 1.0;
    std::string experiment_id = "sim";
};

struct SimRun {
    Trajectory trajectory;
    Experiment experiment;
    double realized_reward = 0.0;
    double expected_regret = 0.0;
};

// One full batched run. Streams derived from the run seed: 0 feeds the
// engine's assignment draws, 1 feeds reward coin flips. Reward flips use
// one uniform per participant position regardless of the arm chosen, so
// runs with the same seed but different policies share their luck.
inline SimRun simulate_run(const Environment& env, const AllocationPolicy& policy,
                           const std::vector<int>& batch_sizes, std::uint64_t seed,
                           const SimulateOptions& options = {}) {
    env.validate();
    if (batch_sizes.empty()) {
        throw ValidationError("invalid-batch-sizes",
                              "a simulated run needs at least one batch");
    }
    for (int n : batch_sizes) {
        if (n < 1) {
            throw ValidationError("invalid-batch-sizes",
                                  "every batch needs at least one participant");
        }
    }

    ExperimentConfig cfg;
    cfg.id = options.experiment_id;
    for (int k = 1; k <= env.num_arms(); ++k) {
        cfg.arm_labels.push_back("arm" + std::to_string(k));
    }
    cfg.alpha0 = options.alpha0;
    cfg.beta0 = options.beta0;
    cfg.policy = policy;
    cfg.batches_planned = static_cast<int>(batch_sizes.size());

    const std::uint64_t experiment_seed = derive_seed(seed, 0);
    auto experiment = Experiment::create(cfg, experiment_seed);
    Rng reward_rng(derive_seed(seed, 1));

    double realized = 0.0;
    for (std::size_t b = 0; b < batch_sizes.size(); ++b) {
        std::vector<std::string> ids;
        for (int i = 1; i <= batch_sizes[b]; ++i) {
            ids.push_back("b" + std::to_string(b + 1) + "-p" + std::to_string(i));
        }
        auto added = experiment.open_batch(ids);
        std::vector<RewardEntry> rewards;
        rewards.reserve(added.size());
        for (const auto& rec : added) {
            const double u = reward_rng.next_double();
            const bool clicked =
                u < env.click_probs[static_cast<std::size_t>(rec.arm.index - 1)];
            rewards.push_back({rec.participant_id, clicked});
            if (clicked) realized += 1.0;
        }
        experiment.record_rewards(rewards);
    }

    SimRun run{build_trajectory(cfg, experiment.records(),
                                experiment.batches_completed(), experiment_seed,
                                options.pa_draws),
               std::move(experiment), realized, 0.0};
    run.expected_regret = cumulative_regret(run.experiment.records(), env);
    return run;
}

struct CampaignOptions {
    std::int64_t pa_draws = 10000;
    double alpha0 = 1.0;
    double beta0 = 1.0;
    double favored_threshold = 0.5;
};

// Everything kept per replication so paired policy comparisons stay possible.
struct PolicyCampaign {
    AllocationPolicy policy;
    std::vector<double> rewards;
    std::vector<double> regrets;
    std::vector<int> favored;
    std::vector<double> max_final_pa;

    double mean_reward() const { return mean(rewards); }
    double mean_regret() const { return mean(regrets); }
    double sd_reward() const { return sd(rewards); }
    double sd_regret() const { return sd(regrets); }

    std::vector<std::int64_t> favored_histogram(int num_arms) const {
        std::vector<std::int64_t> hist(static_cast<std::size_t>(num_arms), 0);
        for (int arm : favored) {
            if (arm >= 1 && arm <= num_arms) hist[static_cast<std::size_t>(arm - 1)] += 1;
        }
        return hist;
    }

    double fraction_confident(double threshold) const {
        if (max_final_pa.empty()) return 0.0;
        std::int64_t n = 0;
        for (double p : max_final_pa) {
            if (p > threshold) ++n;
        }
        return static_cast<double>(n) / static_cast<double>(max_final_pa.size());
    }

    static double mean(const std::vector<double>& xs) {
        if (xs.empty()) return 0.0;
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
    }

    static double sd(const std::vector<double>& xs) {
        if (xs.size() < 2) return 0.0;
        const double m = mean(xs);
        double s = 0.0;
        for (double x : xs) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(xs.size() - 1));
    }
};

struct CampaignResult {
    Environment env;
    std::vector<int> batch_sizes;
    int replications = 0;
    std::uint64_t master_seed = 0;
    double favored_threshold = 0.5;
    std::vector<PolicyCampaign> policies;
};

// Runs every policy against the same replication seeds: replication r uses
// the seed derived as (master seed, r) for each policy, so differences
// between policies are not noise from different draws.
inline CampaignResult run_campaign(const Environment& env,
                                   const std::vector<AllocationPolicy>& policies,
                                   const std::vector<int>& batch_sizes,
                                   int replications, std::uint64_t master_seed,
                                   const CampaignOptions& options = {}) {
    env.validate();
    if (replications < 1) {
        throw ValidationError("invalid-replications",
                              "a campaign needs at least one replication");
    }
    if (policies.empty()) {
        throw ValidationError("invalid-policy", "a campaign needs at least one policy");
    }

    SimulateOptions sim_options;
    sim_options.pa_draws = options.pa_draws;
    sim_options.alpha0 = options.alpha0;
    sim_options.beta0 = options.beta0;

    CampaignResult result{env,        batch_sizes,          replications,
                          master_seed, options.favored_threshold, {}};
    for (const auto& policy : policies) {
        PolicyCampaign pc;
        pc.policy = policy;
        pc.rewards.reserve(static_cast<std::size_t>(replications));
        for (int r = 0; r < replications; ++r) {
            const auto rep_seed = derive_seed(master_seed, static_cast<std::uint64_t>(r));
            auto run = simulate_run(env, policy, batch_sizes, rep_seed, sim_options);
            pc.rewards.push_back(run.realized_reward);
            pc.regrets.push_back(run.expected_regret);
            pc.favored.push_back(run.trajectory.favored_arm());
            pc.max_final_pa.push_back(run.trajectory.max_final_pa());
        }
        result.policies.push_back(std::move(pc));
    }
    return result;
}

// A published click-rate/optimality table to re-render: per week, per
// batch, one (ccr, pa) cell per arm.
struct ReplayBatch {
    int batch = 0;
    std::vector<double> ccr;
    std::vector<double> pa;

    // Cell to emphasize: the arm the sampler most believes in, lowest
    // index winning ties.
    int highlighted_arm() const {
        int best = 1;
        for (std::size_t k = 1; k < pa.size(); ++k) {
            if (pa[k] > pa[static_cast<std::size_t>(best - 1)]) {
                best = static_cast<int>(k + 1);
            }
        }
        return best;
    }
};

struct ReplayWeek {
    std::string label;
    std::vector<ReplayBatch> batches;
};

struct ReplayTable {
    std::vector<std::string> arms;
    std::vector<ReplayWeek> weeks;
};

inline ReplayTable parse_replay_fixture(const nlohmann::json& doc) {
    try {
        ReplayTable table;
        table.arms = doc.at("arms").get<std::vector<std::string>>();
        if (table.arms.size() < 2) {
            throw ValidationError("invalid-fixture",
                                  "a replay table needs at least two arms");
        }
        for (const auto& jw : doc.at("weeks")) {
            ReplayWeek week;
            week.label = jw.at("label").get<std::string>();
            for (const auto& jb : jw.at("batches")) {
                ReplayBatch batch;
                batch.batch = jb.at("batch").get<int>();
                batch.ccr = jb.at("ccr").get<std::vector<double>>();
                batch.pa = jb.at("pa").get<std::vector<double>>();
                if (batch.ccr.size() != table.arms.size() ||
                    batch.pa.size() != table.arms.size()) {
                    throw ValidationError("invalid-fixture",
                                          "ccr/pa width must match the arm count");
                }
                week.batches.push_back(std::move(batch));
            }
            table.weeks.push_back(std::move(week));
        }
        return table;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError("invalid-fixture", e.what());
    }
}

// Plain-text rendering; each batch's most-believed arm has its cell
// wrapped in asterisks.
inline std::string render_replay_table(const ReplayTable& table) {
    std::ostringstream out;
    const std::size_t cell_width = 17;

    out << std::left << std::setw(8) << "week" << std::setw(7) << "batch";
    for (const auto& arm : table.arms) {
        out << std::setw(static_cast<int>(cell_width)) << ("arm " + arm + " ccr/pa");
    }
    out << '\n';

    for (const auto& week : table.weeks) {
        for (const auto& batch : week.batches) {
            out << std::left << std::setw(8) << week.label << std::setw(7)
                << batch.batch;
            const int star = batch.highlighted_arm();
            for (std::size_t k = 0; k < table.arms.size(); ++k) {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(3) << batch.ccr[k] << "/"
                     << batch.pa[k];
                std::string text = cell.str();
                if (static_cast<int>(k + 1) == star) text = "*" + text + "*";
                out << std::setw(static_cast<int>(cell_width)) << text;
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace adex
