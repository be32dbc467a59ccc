#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "adex/engine.hpp"
#include "adex/store.hpp"

namespace adex {

inline std::uint64_t generate_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// JSON-over-HTTP front end for a file-backed experiment store.
//
//   POST /create        {id, arm_labels, batches_planned, policy{kind,...},
//                        alpha0?, beta0?, seed?, idempotency_key?}
//   POST /assign        {experiment, participants, idempotency_key?}
//   POST /rewards       {experiment, rewards:[{participant_id, clicked}],
//                        idempotency_key?}
//   GET  /state         ?experiment=ID
//   GET  /prob-optimal  ?experiment=ID&draws=N
//
// Success bodies carry status "ok" and HTTP 200. Failures carry status
// "error" plus a stable machine code: bad input is 400, state conflicts
// are 409, storage trouble is 500. A mutation that repeats an
// idempotency_key is answered from a cache of completed responses instead
// of re-running; the cache lives in memory and does not survive restarts.
class Service {
public:
    explicit Service(const std::string& store_dir) : store_(store_dir) {}

    void attach(httplib::Server& server) {
        server.Post("/create", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(req, res, [this](const nlohmann::json& p) { return create(p); });
        });
        server.Post("/assign", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(req, res, [this](const nlohmann::json& p) { return assign(p); });
        });
        server.Post("/rewards", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(req, res, [this](const nlohmann::json& p) { return rewards(p); });
        });
        server.Get("/state", [this](const httplib::Request& req, httplib::Response& res) {
            query(req, res, [this](const httplib::Request& r) { return state(r); });
        });
        server.Get("/prob-optimal", [this](const httplib::Request& req, httplib::Response& res) {
            query(req, res, [this](const httplib::Request& r) { return prob_optimal_view(r); });
        });
    }

private:
    static void respond(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(2) + "\n", "application/json");
    }

    static nlohmann::json error_body(const std::string& code, const std::string& message) {
        return {{"status", "error"}, {"code", code}, {"message", message}};
    }

    template <typename Fn>
    void run_guarded(httplib::Response& res, const std::string& idempotency_key, Fn fn) {
        if (!idempotency_key.empty()) {
            auto it = idempotency_.find(idempotency_key);
            if (it != idempotency_.end()) {
                respond(res, it->second.first, it->second.second);
                return;
            }
        }
        try {
            nlohmann::json body = fn();
            body["status"] = "ok";
            if (!idempotency_key.empty()) {
                idempotency_.emplace(idempotency_key, std::make_pair(200, body));
            }
            respond(res, 200, body);
        } catch (const ValidationError& e) {
            respond(res, 400, error_body(e.code(), e.what()));
        } catch (const ConflictError& e) {
            respond(res, 409, error_body(e.code(), e.what()));
        } catch (const nlohmann::json::exception& e) {
            respond(res, 400, error_body("malformed-payload", e.what()));
        } catch (const Error& e) {
            respond(res, 500, error_body(e.code(), e.what()));
        } catch (const std::exception& e) {
            respond(res, 500, error_body("internal", e.what()));
        }
    }

    template <typename Fn>
    void mutate(const httplib::Request& req, httplib::Response& res, Fn fn) {
        std::lock_guard<std::mutex> lock(mutex_);
        nlohmann::json payload;
        if (!req.body.empty()) {
            payload = nlohmann::json::parse(req.body, nullptr, false);
            if (payload.is_discarded()) {
                respond(res, 400, error_body("malformed-json", "body is not valid JSON"));
                return;
            }
        } else {
            payload = nlohmann::json::object();
        }
        const std::string key = payload.value("idempotency_key", "");
        run_guarded(res, key, [&] { return fn(payload); });
    }

    template <typename Fn>
    void query(const httplib::Request& req, httplib::Response& res, Fn fn) {
        std::lock_guard<std::mutex> lock(mutex_);
        run_guarded(res, "", [&] { return fn(req); });
    }

    nlohmann::json create(const nlohmann::json& payload) {
        ExperimentConfig cfg;
        cfg.id = payload.at("id").get<std::string>();
        cfg.arm_labels = payload.at("arm_labels").get<std::vector<std::string>>();
        cfg.alpha0 = payload.value("alpha0", 1.0);
        cfg.beta0 = payload.value("beta0", 1.0);
        cfg.batches_planned = payload.at("batches_planned").get<int>();
        const auto jp = payload.value("policy", nlohmann::json::object());
        cfg.policy = parse_policy(jp.value("kind", std::string("ts")),
                                  jp.value("epsilon", 0.5),
                                  jp.value("share_uniform_data", false));
        if (store_.exists(cfg.id)) {
            throw ConflictError("experiment-exists",
                                "experiment '" + cfg.id + "' already exists");
        }
        const std::uint64_t seed = payload.contains("seed")
                                       ? payload.at("seed").get<std::uint64_t>()
                                       : generate_seed();
        auto experiment = Experiment::create(cfg, seed);
        store_.save(experiment);
        return {{"experiment", cfg.id},
                {"seed", seed},
                {"experiment_status", to_string(experiment.status())},
                {"arm_labels", cfg.arm_labels},
                {"batches_planned", cfg.batches_planned}};
    }

    nlohmann::json assign(const nlohmann::json& payload) {
        auto experiment = store_.load(payload.at("experiment").get<std::string>());
        auto participants = payload.at("participants").get<std::vector<std::string>>();
        auto added = experiment.open_batch(participants);
        store_.save(experiment);

        nlohmann::json assignments = nlohmann::json::array();
        for (const auto& rec : added) {
            assignments.push_back(
                {{"participant_id", rec.participant_id},
                 {"batch", rec.batch},
                 {"arm", rec.arm.index},
                 {"arm_label",
                  experiment.config().arm_labels[static_cast<std::size_t>(rec.arm.index - 1)]},
                 {"source", to_string(rec.source)}});
        }
        return {{"experiment", experiment.config().id},
                {"batch", experiment.batches_completed() + 1},
                {"experiment_status", to_string(experiment.status())},
                {"assignments", std::move(assignments)}};
    }

    nlohmann::json rewards(const nlohmann::json& payload) {
        auto experiment = store_.load(payload.at("experiment").get<std::string>());
        std::vector<RewardEntry> entries;
        for (const auto& jr : payload.at("rewards")) {
            RewardEntry entry;
            entry.participant_id = jr.at("participant_id").get<std::string>();
            const auto& clicked = jr.at("clicked");
            if (clicked.is_boolean()) {
                entry.clicked = clicked.get<bool>();
            } else if (clicked.is_number_integer() &&
                       (clicked.get<int>() == 0 || clicked.get<int>() == 1)) {
                entry.clicked = clicked.get<int>() == 1;
            } else {
                throw ValidationError("invalid-reward-value",
                                      "clicked must be 0, 1, or a boolean");
            }
            entries.push_back(std::move(entry));
        }
        experiment.record_rewards(entries);
        store_.save(experiment);

        nlohmann::json posteriors = nlohmann::json::array();
        for (const auto& p : experiment.posteriors()) {
            posteriors.push_back({{"alpha", p.alpha}, {"beta", p.beta}});
        }
        return {{"experiment", experiment.config().id},
                {"experiment_status", to_string(experiment.status())},
                {"batches_completed", experiment.batches_completed()},
                {"posteriors", std::move(posteriors)}};
    }

    nlohmann::json state(const httplib::Request& req) {
        if (!req.has_param("experiment")) {
            throw ValidationError("missing-parameter", "experiment is required");
        }
        auto experiment = store_.load(req.get_param_value("experiment"));
        return {{"experiment", experiment.snapshot()}};
    }

    nlohmann::json prob_optimal_view(const httplib::Request& req) {
        if (!req.has_param("experiment")) {
            throw ValidationError("missing-parameter", "experiment is required");
        }
        auto experiment = store_.load(req.get_param_value("experiment"));
        std::int64_t draws = kDefaultProbOptimalDraws;
        if (req.has_param("draws")) {
            try {
                draws = std::stoll(req.get_param_value("draws"));
            } catch (const std::exception&) {
                throw ValidationError("invalid-draws", "draws must be an integer");
            }
        }
        auto result = experiment.optimal_probabilities(draws);
        return {{"experiment", experiment.config().id},
                {"arm_labels", experiment.config().arm_labels},
                {"draws", result.draws},
                {"credits", result.credits},
                {"probs", result.probs()}};
    }

    FileStore store_;
    std::mutex mutex_;
    std::unordered_map<std::string, std::pair<int, nlohmann::json>> idempotency_;
};

}  // namespace adex
