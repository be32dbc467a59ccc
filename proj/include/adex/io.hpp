#pragma once

#include <iomanip>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adex/analysis.hpp"
#include "adex/engine.hpp"
#include "adex/simulator.hpp"

// CSV formats. Identifiers and labels may not contain commas, so fields
// are split on bare commas with no quoting:
//   rewards:    participant_id,clicked            (clicked is 0 or 1)
//   records:    participant_id,batch,arm,arm_label,source,clicked
//               (clicked blank while the batch is pending)
//   trajectory: batch,arm,assigned,assigned_uniform,assigned_ts,clicked,ccr,pa
//               (ccr blank until the arm has been assigned at least once)
//   panel:      participant_id,week,arm,clicked[,source]
//   campaign:   policy,replication,reward,regret,favored_arm,max_final_pa

namespace adex {

inline std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

namespace detail {

inline int parse_int_field(const std::string& text, const std::string& column) {
    try {
        std::size_t used = 0;
        const int value = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw ValidationError("malformed-csv",
                              "column '" + column + "' has non-integer value '" +
                                  text + "'");
    }
}

inline bool parse_click_field(const std::string& text) {
    if (text == "0") return false;
    if (text == "1") return true;
    throw ValidationError("invalid-reward-value",
                          "clicked must be 0 or 1, got '" + text + "'");
}

}  // namespace detail

inline std::vector<RewardEntry> read_rewards_csv(std::istream& in) {
    auto rows = read_csv(in);
    if (rows.empty() || rows[0] != std::vector<std::string>{"participant_id", "clicked"}) {
        throw ValidationError("malformed-csv",
                              "rewards files start with 'participant_id,clicked'");
    }
    std::vector<RewardEntry> entries;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) {
            throw ValidationError("malformed-csv",
                                  "rewards row " + std::to_string(i + 1) +
                                      " needs exactly two columns");
        }
        entries.push_back({rows[i][0], detail::parse_click_field(rows[i][1])});
    }
    return entries;
}

inline std::string records_to_csv(const std::vector<AssignmentRecord>& records,
                                  const std::vector<std::string>& arm_labels) {
    std::ostringstream out;
    out << "participant_id,batch,arm,arm_label,source,clicked\n";
    for (const auto& rec : records) {
        out << rec.participant_id << ',' << rec.batch << ',' << rec.arm.index << ','
            << arm_labels[static_cast<std::size_t>(rec.arm.index - 1)] << ','
            << to_string(rec.source) << ',';
        if (rec.reward) out << (*rec.reward ? 1 : 0);
        out << '\n';
    }
    return out.str();
}

inline std::string trajectory_to_csv(const Trajectory& trajectory) {
    std::ostringstream out;
    out << "batch,arm,assigned,assigned_uniform,assigned_ts,clicked,ccr,pa\n";
    out << std::setprecision(17);
    for (const auto& batch : trajectory.batches) {
        for (const auto& row : batch.arms) {
            out << batch.batch << ',' << row.arm << ',' << row.assigned << ','
                << row.assigned_uniform << ',' << row.assigned_ts << ','
                << row.clicked << ',';
            if (row.ccr) out << *row.ccr;
            out << ',' << row.pa << '\n';
        }
    }
    return out.str();
}

inline std::string campaign_to_csv(const CampaignResult& result) {
    std::ostringstream out;
    out << "policy,replication,reward,regret,favored_arm,max_final_pa\n";
    out << std::setprecision(17);
    for (const auto& pc : result.policies) {
        for (std::size_t r = 0; r < pc.rewards.size(); ++r) {
            out << to_string(pc.policy.kind) << ',' << r + 1 << ',' << pc.rewards[r]
                << ',' << pc.regrets[r] << ',' << pc.favored[r] << ','
                << pc.max_final_pa[r] << '\n';
        }
    }
    return out.str();
}

// Panel rows for the regression. When the file carries a source column,
// sampling-sourced rows are dropped unless include_ts is set: rows that the
// adaptive policy steered toward winners are not a random sample, so the
// default keeps only the uniformly assigned ones.
inline std::vector<PanelRow> read_panel_csv(std::istream& in, bool include_ts = false) {
    auto rows = read_csv(in);
    const std::vector<std::string> plain = {"participant_id", "week", "arm", "clicked"};
    const std::vector<std::string> sourced = {"participant_id", "week", "arm",
                                              "clicked", "source"};
    if (rows.empty() || (rows[0] != plain && rows[0] != sourced)) {
        throw ValidationError(
            "malformed-csv",
            "panel files start with 'participant_id,week,arm,clicked[,source]'");
    }
    const bool has_source = rows[0] == sourced;
    std::vector<PanelRow> panel;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) {
            throw ValidationError("malformed-csv",
                                  "panel row " + std::to_string(i + 1) +
                                      " has the wrong number of columns");
        }
        if (has_source) {
            const auto& source = rows[i][4];
            if (source != "uniform" && source != "ts") {
                throw ValidationError("malformed-csv",
                                      "source must be uniform or ts, got '" +
                                          source + "'");
            }
            if (source == "ts" && !include_ts) continue;
        }
        PanelRow row;
        row.participant_id = rows[i][0];
        row.week = rows[i][1];
        row.arm = detail::parse_int_field(rows[i][2], "arm");
        row.clicked = detail::parse_click_field(rows[i][3]);
        panel.push_back(std::move(row));
    }
    return panel;
}

inline std::string panel_to_csv(const std::vector<PanelRow>& rows) {
    std::ostringstream out;
    out << "participant_id,week,arm,clicked\n";
    for (const auto& row : rows) {
        out << row.participant_id << ',' << row.week << ',' << row.arm << ','
            << (row.clicked ? 1 : 0) << '\n';
    }
    return out.str();
}

}  // namespace adex
