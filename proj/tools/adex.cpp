#include <cctype>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adex/analysis.hpp"
#include "adex/engine.hpp"
#include "adex/io.hpp"
#include "adex/service.hpp"
#include "adex/simulator.hpp"
#include "adex/store.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        if (comma == std::string::npos) {
            items.push_back(text.substr(start));
            break;
        }
        items.push_back(text.substr(start, comma - start));
        start = comma + 1;
    }
    return items;
}

// "--arms 4" makes labels arm1..arm4; "--arms a,b,c" uses the given labels
std::vector<std::string> parse_arms(const std::string& text) {
    const bool numeric = !text.empty() &&
                         std::all_of(text.begin(), text.end(),
                                     [](unsigned char c) { return std::isdigit(c); });
    if (numeric) {
        const int n = std::stoi(text);
        std::vector<std::string> labels;
        for (int k = 1; k <= n; ++k) labels.push_back("arm" + std::to_string(k));
        return labels;
    }
    return split_list(text);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw adex::ValidationError("missing-file", "cannot open " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) {
        throw adex::Error("write-failed", "cannot write " + path);
    }
}

std::vector<std::string> read_participants_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw adex::ValidationError("missing-file", "cannot open " + path);
    }
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

std::uint64_t ensure_seed(const CLI::Option* opt, std::uint64_t value) {
    if (opt->count() > 0) return value;
    const auto seed = adex::generate_seed();
    std::cerr << "no --seed given; generated seed " << seed << "\n";
    return seed;
}

json posteriors_json(const adex::Experiment& experiment) {
    json out = json::array();
    for (const auto& p : experiment.posteriors()) {
        out.push_back({{"alpha", p.alpha}, {"beta", p.beta}});
    }
    return out;
}

json trajectory_summary(const adex::SimRun& run, std::uint64_t seed,
                        const adex::AllocationPolicy& policy) {
    json final_pa = json::array();
    std::int64_t participants = 0;
    for (const auto& batch : run.trajectory.batches) {
        for (const auto& row : batch.arms) participants += row.assigned;
    }
    if (!run.trajectory.batches.empty()) {
        for (const auto& row : run.trajectory.batches.back().arms) {
            final_pa.push_back(row.pa);
        }
    }
    return {{"seed", seed},
            {"policy", adex::to_string(policy.kind)},
            {"batches", run.trajectory.batches.size()},
            {"participants", participants},
            {"realized_reward", run.realized_reward},
            {"expected_regret", run.expected_regret},
            {"favored_arm", run.trajectory.favored_arm()},
            {"max_final_pa", run.trajectory.max_final_pa()},
            {"final_pa", std::move(final_pa)}};
}

std::string campaign_summary_text(const adex::CampaignResult& result) {
    std::ostringstream out;
    out << "replications: " << result.replications << ", batches: ";
    for (std::size_t i = 0; i < result.batch_sizes.size(); ++i) {
        out << (i ? "," : "") << result.batch_sizes[i];
    }
    out << ", seed: " << result.master_seed << "\n";
    for (const auto& pc : result.policies) {
        out << adex::to_string(pc.policy.kind) << ": mean reward "
            << pc.mean_reward() << " (sd " << pc.sd_reward() << "), mean regret "
            << pc.mean_regret() << " (sd " << pc.sd_regret() << ")\n";
        out << "  favored arm counts:";
        auto hist = pc.favored_histogram(result.env.num_arms());
        for (std::size_t k = 0; k < hist.size(); ++k) {
            out << " arm" << k + 1 << "=" << hist[k];
        }
        out << "\n  fraction of runs with max final optimality prob > "
            << result.favored_threshold << ": "
            << pc.fraction_confident(result.favored_threshold) << "\n";
    }
    return out.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"batched adaptive experiments over binary rewards"};
    app.require_subcommand(1);

    // ---- create ----------------------------------------------------------
    auto* create = app.add_subcommand("create", "create a new experiment");
    std::string create_store, create_id, create_arms, create_policy = "ts";
    double create_alpha0 = 1.0, create_beta0 = 1.0, create_epsilon = 0.5;
    bool create_share = false;
    int create_batches = 4;
    std::uint64_t create_seed = 0;
    create->add_option("--store", create_store, "experiment store directory")->required();
    create->add_option("--experiment", create_id, "experiment id")->required();
    create->add_option("--arms", create_arms,
                       "arm count (e.g. 4) or comma-separated labels")->required();
    create->add_option("--alpha0", create_alpha0, "prior successes per arm");
    create->add_option("--beta0", create_beta0, "prior failures per arm");
    create->add_option("--policy", create_policy, "uniform|ts|hybrid");
    create->add_option("--epsilon", create_epsilon, "hybrid uniform share");
    create->add_flag("--share-uniform-data", create_share,
                     "fold uniform-sourced rewards into the posterior (hybrid)");
    create->add_option("--batches", create_batches, "planned batch budget");
    auto* create_seed_opt = create->add_option("--seed", create_seed, "master seed");
    create->callback([&] {
        adex::ExperimentConfig cfg;
        cfg.id = create_id;
        cfg.arm_labels = parse_arms(create_arms);
        cfg.alpha0 = create_alpha0;
        cfg.beta0 = create_beta0;
        cfg.policy = adex::parse_policy(create_policy, create_epsilon, create_share);
        cfg.batches_planned = create_batches;

        adex::FileStore store(create_store);
        if (store.exists(cfg.id)) {
            throw adex::ConflictError("experiment-exists",
                                      "experiment '" + cfg.id + "' already exists");
        }
        const auto seed = ensure_seed(create_seed_opt, create_seed);
        auto experiment = adex::Experiment::create(cfg, seed);
        store.save(experiment);
        json out = {{"experiment", cfg.id},
                    {"seed", seed},
                    {"experiment_status", adex::to_string(experiment.status())},
                    {"arm_labels", cfg.arm_labels},
                    {"policy", adex::to_string(cfg.policy.kind)},
                    {"batches_planned", cfg.batches_planned}};
        std::cout << out.dump(2) << "\n";
    });

    // ---- open-batch ------------------------------------------------------
    auto* open_batch = app.add_subcommand("open-batch",
                                          "assign arms to a new batch of participants");
    std::string ob_store, ob_id, ob_participants, ob_file;
    open_batch->add_option("--store", ob_store, "experiment store directory")->required();
    open_batch->add_option("--experiment", ob_id, "experiment id")->required();
    open_batch->add_option("--participants", ob_participants,
                           "comma-separated participant ids");
    open_batch->add_option("--participants-file", ob_file,
                           "file with one participant id per line");
    open_batch->callback([&] {
        std::vector<std::string> ids;
        if (!ob_participants.empty()) ids = split_list(ob_participants);
        if (!ob_file.empty()) {
            auto more = read_participants_file(ob_file);
            ids.insert(ids.end(), more.begin(), more.end());
        }
        if (ids.empty()) {
            throw adex::ValidationError(
                "missing-participants",
                "provide --participants or --participants-file");
        }
        adex::FileStore store(ob_store);
        auto experiment = store.load(ob_id);
        auto added = experiment.open_batch(ids);
        store.save(experiment);
        std::cout << adex::records_to_csv(added, experiment.config().arm_labels);
    });

    // ---- record ----------------------------------------------------------
    auto* record = app.add_subcommand("record", "record rewards for the pending batch");
    std::string rec_store, rec_id, rec_file;
    record->add_option("--store", rec_store, "experiment store directory")->required();
    record->add_option("--experiment", rec_id, "experiment id")->required();
    record->add_option("--rewards", rec_file,
                       "CSV of participant_id,clicked (unlisted participants count "
                       "as no-click)")->required();
    record->callback([&] {
        std::istringstream in(read_file(rec_file));
        auto entries = adex::read_rewards_csv(in);
        adex::FileStore store(rec_store);
        auto experiment = store.load(rec_id);
        experiment.record_rewards(entries);
        store.save(experiment);
        json out = {{"experiment", rec_id},
                    {"experiment_status", adex::to_string(experiment.status())},
                    {"batches_completed", experiment.batches_completed()},
                    {"posteriors", posteriors_json(experiment)}};
        std::cout << out.dump(2) << "\n";
    });

    // ---- status ----------------------------------------------------------
    auto* status = app.add_subcommand("status", "print an experiment's full snapshot");
    std::string st_store, st_id;
    status->add_option("--store", st_store, "experiment store directory")->required();
    status->add_option("--experiment", st_id, "experiment id")->required();
    status->callback([&] {
        adex::FileStore store(st_store);
        std::cout << store.load(st_id).snapshot().dump(2) << "\n";
    });

    // ---- prob-optimal ----------------------------------------------------
    auto* po = app.add_subcommand(
        "prob-optimal", "estimate each arm's probability of being the best");
    std::string po_store, po_id;
    std::vector<double> po_alpha, po_beta;
    std::int64_t po_draws = adex::kDefaultProbOptimalDraws;
    std::uint64_t po_seed = 0;
    po->add_option("--store", po_store, "experiment store directory");
    po->add_option("--experiment", po_id, "experiment id");
    po->add_option("--alpha", po_alpha, "posterior alphas (direct mode)")
        ->delimiter(',');
    po->add_option("--beta", po_beta, "posterior betas (direct mode)")->delimiter(',');
    po->add_option("--draws", po_draws, "Monte-Carlo draws");
    po->add_option("--seed", po_seed, "seed for direct mode (default 0)");
    po->callback([&] {
        json out;
        if (!po_id.empty()) {
            if (po_store.empty()) {
                throw adex::ValidationError("missing-store",
                                            "--experiment needs --store");
            }
            adex::FileStore store(po_store);
            auto experiment = store.load(po_id);
            auto result = experiment.optimal_probabilities(po_draws);
            out = {{"experiment", po_id},
                   {"arm_labels", experiment.config().arm_labels},
                   {"draws", result.draws},
                   {"credits", result.credits},
                   {"probs", result.probs()}};
        } else {
            if (po_alpha.empty() || po_alpha.size() != po_beta.size()) {
                throw adex::ValidationError(
                    "invalid-posterior",
                    "direct mode needs matching --alpha and --beta lists");
            }
            std::vector<adex::BetaParams> posteriors;
            for (std::size_t k = 0; k < po_alpha.size(); ++k) {
                posteriors.push_back({po_alpha[k], po_beta[k]});
            }
            adex::Rng rng(po_seed);
            auto result = adex::prob_optimal(posteriors, po_draws, rng);
            out = {{"draws", result.draws},
                   {"credits", result.credits},
                   {"probs", result.probs()}};
        }
        std::cout << out.dump(2) << "\n";
    });

    // ---- simulate --------------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "run one synthetic experiment");
    std::vector<double> sim_probs;
    std::string sim_policy = "ts", sim_out, sim_store, sim_id = "sim";
    double sim_epsilon = 0.5, sim_alpha0 = 1.0, sim_beta0 = 1.0;
    bool sim_share = false;
    int sim_batches = 4, sim_batch_size = 100;
    std::vector<int> sim_batch_sizes;
    std::int64_t sim_pa_draws = 100000;
    std::uint64_t sim_seed = 0;
    simulate->add_option("--click-probs", sim_probs, "true click probability per arm")
        ->delimiter(',')->required();
    simulate->add_option("--policy", sim_policy, "uniform|ts|hybrid");
    simulate->add_option("--epsilon", sim_epsilon, "hybrid uniform share");
    simulate->add_flag("--share-uniform-data", sim_share,
                       "fold uniform-sourced rewards into the posterior (hybrid)");
    simulate->add_option("--batches", sim_batches, "number of equal batches");
    simulate->add_option("--batch-size", sim_batch_size, "participants per batch");
    simulate->add_option("--batch-sizes", sim_batch_sizes,
                         "explicit per-batch sizes (overrides --batches/--batch-size)")
        ->delimiter(',');
    simulate->add_option("--pa-draws", sim_pa_draws,
                         "Monte-Carlo draws per optimality readout");
    auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "run seed");
    simulate->add_option("--out", sim_out, "write the batch-by-batch table as CSV");
    simulate->add_option("--store", sim_store,
                         "also persist the finished experiment to this store");
    simulate->add_option("--experiment", sim_id,
                         "experiment id used when persisting (default sim)");
    simulate->callback([&] {
        auto policy = adex::parse_policy(sim_policy, sim_epsilon, sim_share);
        auto sizes = sim_batch_sizes;
        if (sizes.empty()) sizes.assign(static_cast<std::size_t>(sim_batches), sim_batch_size);
        const auto seed = ensure_seed(sim_seed_opt, sim_seed);

        adex::SimulateOptions options;
        options.pa_draws = sim_pa_draws;
        options.alpha0 = sim_alpha0;
        options.beta0 = sim_beta0;
        options.experiment_id = sim_id;
        auto run = adex::simulate_run(adex::Environment{sim_probs}, policy, sizes,
                                      seed, options);
        if (!sim_out.empty()) {
            write_output(sim_out, adex::trajectory_to_csv(run.trajectory));
        }
        if (!sim_store.empty()) {
            adex::FileStore store(sim_store);
            if (store.exists(sim_id)) {
                throw adex::ConflictError("experiment-exists",
                                          "experiment '" + sim_id +
                                              "' already exists");
            }
            store.save(run.experiment);
        }
        std::cout << trajectory_summary(run, seed, policy).dump(2) << "\n";
    });

    // ---- campaign --------------------------------------------------------
    auto* campaign = app.add_subcommand(
        "campaign", "replicate simulated runs across policies with shared seeds");
    std::vector<double> camp_probs;
    std::vector<std::string> camp_policies = {"ts", "uniform"};
    double camp_epsilon = 0.5, camp_threshold = 0.5;
    bool camp_share = false, camp_json = false;
    int camp_batches = 4, camp_batch_size = 100, camp_reps = 100;
    std::vector<int> camp_batch_sizes;
    std::int64_t camp_pa_draws = 10000;
    std::uint64_t camp_seed = 0;
    std::string camp_out;
    campaign->add_option("--click-probs", camp_probs, "true click probability per arm")
        ->delimiter(',')->required();
    campaign->add_option("--policies", camp_policies, "subset of uniform,ts,hybrid")
        ->delimiter(',');
    campaign->add_option("--epsilon", camp_epsilon, "hybrid uniform share");
    campaign->add_flag("--share-uniform-data", camp_share,
                       "fold uniform-sourced rewards into the posterior (hybrid)");
    campaign->add_option("--batches", camp_batches, "number of equal batches");
    campaign->add_option("--batch-size", camp_batch_size, "participants per batch");
    campaign->add_option("--batch-sizes", camp_batch_sizes,
                         "explicit per-batch sizes (overrides --batches/--batch-size)")
        ->delimiter(',');
    campaign->add_option("--replications", camp_reps, "runs per policy");
    campaign->add_option("--pa-draws", camp_pa_draws,
                         "Monte-Carlo draws per optimality readout");
    campaign->add_option("--threshold", camp_threshold,
                         "confidence threshold on the max final optimality prob");
    auto* camp_seed_opt = campaign->add_option("--seed", camp_seed, "master seed");
    campaign->add_option("--out", camp_out, "write per-replication results as CSV");
    campaign->add_flag("--json", camp_json, "print the summary as JSON");
    campaign->callback([&] {
        std::vector<adex::AllocationPolicy> policies;
        for (const auto& name : camp_policies) {
            policies.push_back(adex::parse_policy(name, camp_epsilon, camp_share));
        }
        auto sizes = camp_batch_sizes;
        if (sizes.empty()) {
            sizes.assign(static_cast<std::size_t>(camp_batches), camp_batch_size);
        }
        const auto seed = ensure_seed(camp_seed_opt, camp_seed);

        adex::CampaignOptions options;
        options.pa_draws = camp_pa_draws;
        options.favored_threshold = camp_threshold;
        auto result = adex::run_campaign(adex::Environment{camp_probs}, policies,
                                         sizes, camp_reps, seed, options);
        if (!camp_out.empty()) {
            write_output(camp_out, adex::campaign_to_csv(result));
        }
        if (camp_json) {
            json jp = json::array();
            for (const auto& pc : result.policies) {
                jp.push_back({{"policy", adex::to_string(pc.policy.kind)},
                              {"mean_reward", pc.mean_reward()},
                              {"sd_reward", pc.sd_reward()},
                              {"mean_regret", pc.mean_regret()},
                              {"sd_regret", pc.sd_regret()},
                              {"favored_histogram",
                               pc.favored_histogram(result.env.num_arms())},
                              {"fraction_confident",
                               pc.fraction_confident(result.favored_threshold)}});
            }
            json out = {{"seed", seed},
                        {"replications", result.replications},
                        {"policies", std::move(jp)}};
            std::cout << out.dump(2) << "\n";
        } else {
            std::cout << campaign_summary_text(result);
        }
    });

    // ---- analyze ---------------------------------------------------------
    auto* analyze = app.add_subcommand(
        "analyze", "fit the panel regression of clicks on arm indicators");
    std::string an_panel;
    bool an_include_ts = false, an_no_weeks = false, an_participant_fe = false,
         an_json = false;
    analyze->add_option("--panel", an_panel,
                        "CSV of participant_id,week,arm,clicked[,source]")->required();
    analyze->add_flag("--include-ts", an_include_ts,
                      "keep sampling-sourced rows (default drops them)");
    analyze->add_flag("--no-week-effects", an_no_weeks, "drop week indicators");
    analyze->add_flag("--participant-effects", an_participant_fe,
                      "absorb participant fixed effects");
    analyze->add_flag("--json", an_json, "print the fit as JSON");
    analyze->callback([&] {
        std::istringstream in(read_file(an_panel));
        auto rows = adex::read_panel_csv(in, an_include_ts);
        adex::RegressionOptions options;
        options.week_effects = !an_no_weeks;
        options.participant_effects = an_participant_fe;
        auto fit = adex::fit_panel_ols(rows, options);
        if (an_json) {
            std::cout << adex::to_json(fit).dump(2) << "\n";
        } else {
            std::cout << "overall click rate: " << adex::overall_click_rate(rows)
                      << " over " << rows.size() << " rows\n"
                      << adex::render_regression(fit);
        }
    });

    // ---- replay-table ----------------------------------------------------
    auto* replay = app.add_subcommand(
        "replay-table", "render a published click-rate/optimality table");
    std::string rt_fixture;
    replay->add_option("--fixture", rt_fixture, "fixture JSON")->required();
    replay->callback([&] {
        json doc;
        try {
            doc = json::parse(read_file(rt_fixture));
        } catch (const json::exception& e) {
            throw adex::ValidationError("invalid-fixture", e.what());
        }
        std::cout << adex::render_replay_table(adex::parse_replay_fixture(doc));
    });

    // ---- export ----------------------------------------------------------
    auto* export_cmd = app.add_subcommand("export", "write experiment data to a file");
    std::string ex_store, ex_id, ex_what = "snapshot", ex_out;
    std::int64_t ex_pa_draws = 100000;
    export_cmd->add_option("--store", ex_store, "experiment store directory")->required();
    export_cmd->add_option("--experiment", ex_id, "experiment id")->required();
    export_cmd->add_option("--what", ex_what, "snapshot|records|trajectory");
    export_cmd->add_option("--pa-draws", ex_pa_draws,
                           "Monte-Carlo draws per optimality readout (trajectory)");
    export_cmd->add_option("--out", ex_out, "output path (default stdout)");
    export_cmd->callback([&] {
        adex::FileStore store(ex_store);
        auto experiment = store.load(ex_id);
        if (ex_what == "snapshot") {
            write_output(ex_out, experiment.snapshot().dump(2) + "\n");
        } else if (ex_what == "records") {
            write_output(ex_out, adex::records_to_csv(experiment.records(),
                                                      experiment.config().arm_labels));
        } else if (ex_what == "trajectory") {
            auto trajectory = adex::build_trajectory(
                experiment.config(), experiment.records(),
                experiment.batches_completed(), experiment.seed(), ex_pa_draws);
            write_output(ex_out, adex::trajectory_to_csv(trajectory));
        } else {
            throw adex::ValidationError("invalid-export",
                                        "--what must be snapshot, records, or "
                                        "trajectory");
        }
    });

    // ---- serve -----------------------------------------------------------
    auto* serve = app.add_subcommand("serve", "run the HTTP service");
    std::string sv_store, sv_host = "127.0.0.1";
    int sv_port = 8787;
    serve->add_option("--store", sv_store, "experiment store directory")->required();
    serve->add_option("--host", sv_host, "bind address");
    serve->add_option("--port", sv_port, "port (0 picks a free one)");
    serve->callback([&] {
        adex::Service service(sv_store);
        httplib::Server server;
        service.attach(server);
        int port = sv_port;
        if (port == 0) {
            port = server.bind_to_any_port(sv_host);
            if (port <= 0) {
                throw adex::Error("bind-failed", "cannot bind " + sv_host);
            }
            std::cerr << "listening on " << sv_host << ":" << port << "\n";
            if (!server.listen_after_bind()) {
                throw adex::Error("serve-failed", "server stopped unexpectedly");
            }
        } else {
            std::cerr << "listening on " << sv_host << ":" << port << "\n";
            if (!server.listen(sv_host, port)) {
                throw adex::Error("serve-failed",
                                  "cannot listen on " + sv_host + ":" +
                                      std::to_string(port));
            }
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const adex::Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
