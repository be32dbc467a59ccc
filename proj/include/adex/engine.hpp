#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adex/allocation.hpp"
#include "adex/errors.hpp"
#include "adex/posterior.hpp"
#include "adex/rng.hpp"

namespace adex {

// Lifecycle: Open -> (open_batch) -> BatchPending -> (record_rewards) -> Open,
// until the planned batch budget is spent, which lands the experiment in
// Closed. Illegal transitions throw without touching state.
enum class ExperimentStatus { Open, BatchPending, Closed };

inline std::string to_string(ExperimentStatus s) {
    switch (s) {
        case ExperimentStatus::Open: return "open";
        case ExperimentStatus::BatchPending: return "batch-pending";
        case ExperimentStatus::Closed: return "closed";
    }
    return "?";
}

inline ExperimentStatus status_from_string(const std::string& s) {
    if (s == "open") return ExperimentStatus::Open;
    if (s == "batch-pending") return ExperimentStatus::BatchPending;
    if (s == "closed") return ExperimentStatus::Closed;
    throw ValidationError("corrupt-snapshot", "unknown status '" + s + "'");
}

inline bool valid_identifier(const std::string& id) {
    if (id.empty() || id.size() > 128) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '.' || c == '-';
    });
}

struct ExperimentConfig {
    std::string id;
    std::vector<std::string> arm_labels;
    double alpha0 = 1.0;
    double beta0 = 1.0;
    AllocationPolicy policy;
    int batches_planned = 1;

    int num_arms() const { return static_cast<int>(arm_labels.size()); }

    void validate() const {
        if (!valid_identifier(id)) {
            throw ValidationError(
                "invalid-experiment-id",
                "experiment id must be 1-128 chars of [A-Za-z0-9_.-]");
        }
        if (arm_labels.size() < 2) {
            throw ValidationError("invalid-arm-count",
                                  "an experiment needs at least two arms");
        }
        std::unordered_set<std::string> seen;
        for (const auto& label : arm_labels) {
            if (label.empty() || label.find(',') != std::string::npos ||
                label.find('\n') != std::string::npos) {
                throw ValidationError("invalid-arm-label",
                                      "arm labels must be non-empty and free of "
                                      "commas and newlines");
            }
            if (!seen.insert(label).second) {
                throw ValidationError("invalid-arm-label",
                                      "duplicate arm label '" + label + "'");
            }
        }
        if (!(alpha0 > 0.0) || !(beta0 > 0.0)) {
            throw ValidationError("invalid-prior",
                                  "prior parameters must be positive");
        }
        if (batches_planned < 1) {
            throw ValidationError("invalid-batch-budget",
                                  "batches_planned must be at least 1");
        }
        policy.validate();
    }
};

struct RewardEntry {
    std::string participant_id;
    bool clicked = false;
};

struct AssignmentRecord {
    std::string participant_id;
    int batch = 0;  // 1-based
    ArmId arm{1};
    AllocationSource source = AllocationSource::UniformArm;
    std::optional<bool> reward;  // empty until the batch's rewards are folded

    friend bool operator==(const AssignmentRecord&, const AssignmentRecord&) = default;
};

struct ArmCounts {
    std::int64_t assigned = 0;
    std::int64_t clicked = 0;
    std::int64_t assigned_uniform = 0;
    std::int64_t assigned_ts = 0;
    std::int64_t clicked_uniform = 0;
    std::int64_t clicked_ts = 0;
};

// Folds one completed batch's per-arm reward tallies into the posterior,
// honoring the policy's rule for uniform-source rewards. Records from other
// batches are ignored; every record in the batch must carry a reward.
inline void fold_completed_batch(std::vector<BetaParams>& posteriors,
                                 const std::vector<AssignmentRecord>& records,
                                 int batch, const AllocationPolicy& policy) {
    std::vector<std::int64_t> successes(posteriors.size(), 0);
    std::vector<std::int64_t> failures(posteriors.size(), 0);
    for (const auto& rec : records) {
        if (rec.batch != batch) continue;
        if (rec.source == AllocationSource::UniformArm &&
            !policy.uses_uniform_rewards()) {
            continue;
        }
        const auto k = static_cast<std::size_t>(rec.arm.index - 1);
        (rec.reward.value() ? successes[k] : failures[k]) += 1;
    }
    for (std::size_t k = 0; k < posteriors.size(); ++k) {
        posteriors[k] = batch_fold(posteriors[k], successes[k], failures[k]);
    }
}

class Experiment {
public:
    static Experiment create(ExperimentConfig config, std::uint64_t seed) {
        config.validate();
        Experiment e(std::move(config), seed);
        e.posteriors_ = init_prior(e.config_.num_arms(), e.config_.alpha0,
                                   e.config_.beta0);
        return e;
    }

    const ExperimentConfig& config() const { return config_; }
    ExperimentStatus status() const { return status_; }
    int batches_completed() const { return batches_completed_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<BetaParams>& posteriors() const { return posteriors_; }
    const std::vector<AssignmentRecord>& records() const { return records_; }

    // Assigns every listed participant an arm against the posterior as it
    // stands right now; the posterior then stays frozen until the batch's
    // rewards are recorded. Validation happens before any state changes.
    std::vector<AssignmentRecord> open_batch(
        const std::vector<std::string>& participant_ids) {
        if (status_ == ExperimentStatus::Closed) {
            throw ConflictError("experiment-closed",
                                "all planned batches have already run");
        }
        if (status_ == ExperimentStatus::BatchPending) {
            throw ConflictError("batch-pending",
                                "a batch is already awaiting rewards");
        }
        std::unordered_set<std::string> in_request;
        for (const auto& pid : participant_ids) {
            if (!valid_identifier(pid)) {
                throw ValidationError(
                    "invalid-participant-id",
                    "participant ids must be 1-128 chars of [A-Za-z0-9_.-]");
            }
            if (!in_request.insert(pid).second) {
                throw ValidationError("duplicate-participant",
                                      "participant '" + pid +
                                          "' listed twice in one batch");
            }
            if (known_participants_.count(pid) != 0) {
                throw ConflictError("participant-exists",
                                    "participant '" + pid +
                                        "' was already assigned earlier");
            }
        }

        const int batch = batches_completed_ + 1;
        auto assignments = assign_batch(posteriors_, config_.policy,
                                        static_cast<int>(participant_ids.size()),
                                        rng_);
        std::vector<AssignmentRecord> added;
        added.reserve(assignments.size());
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            added.push_back({participant_ids[i], batch, assignments[i].arm,
                             assignments[i].source, std::nullopt});
        }
        records_.insert(records_.end(), added.begin(), added.end());
        for (const auto& pid : participant_ids) known_participants_.insert(pid);
        status_ = ExperimentStatus::BatchPending;
        return added;
    }

    // Closes the pending batch: listed participants get their observed
    // reward, everyone else in the batch is counted as no-click, and the
    // per-arm tallies fold into the posterior in one step. Uniform-source
    // rewards fold only when the policy says they feed the posterior.
    void record_rewards(const std::vector<RewardEntry>& rewards) {
        if (status_ == ExperimentStatus::Closed) {
            throw ConflictError("experiment-closed",
                                "all planned batches have already run");
        }
        if (status_ == ExperimentStatus::Open) {
            throw ConflictError("no-batch-pending",
                                "no batch is awaiting rewards");
        }

        const int batch = batches_completed_ + 1;
        std::unordered_map<std::string, std::size_t> batch_index;
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (records_[i].batch == batch) {
                batch_index.emplace(records_[i].participant_id, i);
            }
        }
        std::unordered_map<std::string, bool> observed;
        for (const auto& entry : rewards) {
            if (batch_index.count(entry.participant_id) == 0) {
                throw ValidationError("unknown-participant",
                                      "participant '" + entry.participant_id +
                                          "' is not in the pending batch");
            }
            if (!observed.emplace(entry.participant_id, entry.clicked).second) {
                throw ValidationError("duplicate-reward",
                                      "participant '" + entry.participant_id +
                                          "' has two reward entries");
            }
        }

        for (auto& [pid, idx] : batch_index) {
            auto it = observed.find(pid);
            records_[idx].reward = it != observed.end() && it->second;
        }
        fold_completed_batch(posteriors_, records_, batch, config_.policy);
        batches_completed_ = batch;
        status_ = batches_completed_ >= config_.batches_planned
                      ? ExperimentStatus::Closed
                      : ExperimentStatus::Open;
    }

    // Read-only probability-of-optimal estimate for the current posterior.
    // Draws come from a stream derived from the experiment seed and the batch
    // count, so repeated calls agree and never disturb assignment draws.
    ProbOptimal optimal_probabilities(
        std::int64_t draws = kDefaultProbOptimalDraws) const {
        Rng pa_rng(derive_seed(seed_, 16 + static_cast<std::uint64_t>(
                                              batches_completed_)));
        return prob_optimal(posteriors_, draws, pa_rng);
    }

    std::vector<ArmCounts> counts() const {
        std::vector<ArmCounts> out(posteriors_.size());
        for (const auto& rec : records_) {
            auto& c = out[static_cast<std::size_t>(rec.arm.index - 1)];
            c.assigned += 1;
            const bool is_uniform = rec.source == AllocationSource::UniformArm;
            (is_uniform ? c.assigned_uniform : c.assigned_ts) += 1;
            if (rec.reward && *rec.reward) {
                c.clicked += 1;
                (is_uniform ? c.clicked_uniform : c.clicked_ts) += 1;
            }
        }
        return out;
    }

    nlohmann::json snapshot() const {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : records_) {
            nlohmann::json jr = {{"participant_id", r.participant_id},
                                 {"batch", r.batch},
                                 {"arm", r.arm.index},
                                 {"source", to_string(r.source)}};
            if (r.reward) {
                jr["reward"] = *r.reward ? 1 : 0;
            } else {
                jr["reward"] = nullptr;
            }
            recs.push_back(std::move(jr));
        }
        nlohmann::json posts = nlohmann::json::array();
        for (const auto& p : posteriors_) {
            posts.push_back({{"alpha", p.alpha}, {"beta", p.beta}});
        }
        const auto st = rng_.state();
        return {{"format_version", 1},
                {"config",
                 {{"id", config_.id},
                  {"arm_labels", config_.arm_labels},
                  {"alpha0", config_.alpha0},
                  {"beta0", config_.beta0},
                  {"policy",
                   {{"kind", to_string(config_.policy.kind)},
                    {"epsilon", config_.policy.epsilon},
                    {"share_uniform_data", config_.policy.share_uniform_data}}},
                  {"batches_planned", config_.batches_planned}}},
                {"seed", seed_},
                {"rng_state", std::vector<std::uint64_t>(st.begin(), st.end())},
                {"status", to_string(status_)},
                {"batches_completed", batches_completed_},
                {"posteriors", std::move(posts)},
                {"records", std::move(recs)}};
    }

    static Experiment restore(const nlohmann::json& snap) {
        try {
            return restore_checked(snap);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw ValidationError("corrupt-snapshot", e.what());
        }
    }

private:
    Experiment(ExperimentConfig config, std::uint64_t seed)
        : config_(std::move(config)), seed_(seed), rng_(seed) {}

    static Experiment restore_checked(const nlohmann::json& snap) {
        if (snap.at("format_version").get<int>() != 1) {
            throw ValidationError("unsupported-snapshot",
                                  "unknown snapshot format version");
        }
        const auto& jc = snap.at("config");
        ExperimentConfig cfg;
        cfg.id = jc.at("id").get<std::string>();
        cfg.arm_labels = jc.at("arm_labels").get<std::vector<std::string>>();
        cfg.alpha0 = jc.at("alpha0").get<double>();
        cfg.beta0 = jc.at("beta0").get<double>();
        cfg.policy = parse_policy(
            jc.at("policy").at("kind").get<std::string>(),
            jc.at("policy").at("epsilon").get<double>(),
            jc.at("policy").at("share_uniform_data").get<bool>());
        cfg.batches_planned = jc.at("batches_planned").get<int>();
        cfg.validate();

        Experiment e(std::move(cfg), snap.at("seed").get<std::uint64_t>());
        e.status_ = status_from_string(snap.at("status").get<std::string>());
        e.batches_completed_ = snap.at("batches_completed").get<int>();

        auto state_vec = snap.at("rng_state").get<std::vector<std::uint64_t>>();
        if (state_vec.size() != 4) {
            throw ValidationError("corrupt-snapshot",
                                  "rng_state must hold four words");
        }
        Rng::state_type st;
        std::copy(state_vec.begin(), state_vec.end(), st.begin());
        try {
            e.rng_.set_state(st);
        } catch (const std::invalid_argument& ex) {
            throw ValidationError("corrupt-snapshot", ex.what());
        }

        for (const auto& jp : snap.at("posteriors")) {
            e.posteriors_.push_back(
                {jp.at("alpha").get<double>(), jp.at("beta").get<double>()});
        }
        if (e.posteriors_.size() != e.config_.arm_labels.size()) {
            throw ValidationError("corrupt-snapshot",
                                  "posterior count does not match arm count");
        }

        for (const auto& jr : snap.at("records")) {
            AssignmentRecord rec;
            rec.participant_id = jr.at("participant_id").get<std::string>();
            rec.batch = jr.at("batch").get<int>();
            rec.arm = ArmId{jr.at("arm").get<int>()};
            const auto src = jr.at("source").get<std::string>();
            if (src == "uniform") {
                rec.source = AllocationSource::UniformArm;
            } else if (src == "ts") {
                rec.source = AllocationSource::TSArm;
            } else {
                throw ValidationError("corrupt-snapshot",
                                      "unknown assignment source '" + src + "'");
            }
            if (!jr.at("reward").is_null()) {
                rec.reward = jr.at("reward").get<int>() != 0;
            }
            e.records_.push_back(std::move(rec));
        }
        e.check_consistency();
        for (const auto& rec : e.records_) {
            e.known_participants_.insert(rec.participant_id);
        }
        return e;
    }

    // A snapshot is rejected unless the stored posterior is exactly what
    // replaying the stored records reproduces; truncated or hand-edited
    // files fail here instead of silently skewing later assignments.
    void check_consistency() const {
        if (batches_completed_ < 0 ||
            batches_completed_ > config_.batches_planned) {
            throw ValidationError("corrupt-snapshot",
                                  "batch counter out of range");
        }
        if (status_ == ExperimentStatus::Closed &&
            batches_completed_ != config_.batches_planned) {
            throw ValidationError("corrupt-snapshot",
                                  "closed experiment with unspent budget");
        }
        if (status_ != ExperimentStatus::Closed &&
            batches_completed_ >= config_.batches_planned &&
            config_.batches_planned > 0) {
            throw ValidationError("corrupt-snapshot",
                                  "open experiment with exhausted budget");
        }
        const int open_batches =
            batches_completed_ + (status_ == ExperimentStatus::BatchPending ? 1 : 0);
        std::unordered_set<std::string> seen;
        for (const auto& rec : records_) {
            if (!seen.insert(rec.participant_id).second) {
                throw ValidationError("corrupt-snapshot",
                                      "duplicate participant in records");
            }
            if (rec.batch < 1 || rec.batch > open_batches) {
                throw ValidationError("corrupt-snapshot",
                                      "record batch out of range");
            }
            if (rec.arm.index < 1 || rec.arm.index > config_.num_arms()) {
                throw ValidationError("corrupt-snapshot",
                                      "record arm out of range");
            }
            const bool pending =
                status_ == ExperimentStatus::BatchPending && rec.batch == open_batches;
            if (pending && rec.reward.has_value()) {
                throw ValidationError("corrupt-snapshot",
                                      "pending batch already has rewards");
            }
            if (!pending && !rec.reward.has_value()) {
                throw ValidationError("corrupt-snapshot",
                                      "completed batch missing rewards");
            }
        }

        auto replayed = init_prior(config_.num_arms(), config_.alpha0, config_.beta0);
        for (int b = 1; b <= batches_completed_; ++b) {
            fold_completed_batch(replayed, records_, b, config_.policy);
        }
        if (replayed != posteriors_) {
            throw ValidationError("corrupt-snapshot",
                                  "stored posterior does not match records");
        }
    }

    ExperimentConfig config_;
    std::uint64_t seed_ = 0;
    Rng rng_;
    ExperimentStatus status_ = ExperimentStatus::Open;
    int batches_completed_ = 0;
    std::vector<BetaParams> posteriors_;
    std::vector<AssignmentRecord> records_;
    std::unordered_set<std::string> known_participants_;
};

}  // namespace adex
