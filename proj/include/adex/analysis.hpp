#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

// glibc's resolv.h (dragged in by networking headers) leaks a `_res` macro
// that mangles parameter names inside Eigen.
#ifdef _res
#undef _res
#endif
#include <Eigen/Dense>
#include <json.hpp>

#include "adex/engine.hpp"

namespace adex {

// One observation for the panel regression: a participant's click outcome
// in a given week under a given arm.
struct PanelRow {
    std::string participant_id;
    std::string week;
    int arm = 1;
    bool clicked = false;

    friend bool operator==(const PanelRow&, const PanelRow&) = default;
};

// Cumulative clicked/assigned for one arm through the given batch, over
// both allocation sources. Empty when the arm was never assigned in range;
// an error if the range still has unresolved rewards.
inline std::optional<double> cumulative_click_rate(
    const std::vector<AssignmentRecord>& records, int arm, int through_batch) {
    std::int64_t assigned = 0, clicked = 0;
    for (const auto& rec : records) {
        if (rec.batch > through_batch || rec.arm.index != arm) continue;
        if (!rec.reward.has_value()) {
            throw ValidationError("unresolved-rewards",
                                  "batch " + std::to_string(rec.batch) +
                                      " has no recorded rewards yet");
        }
        assigned += 1;
        if (*rec.reward) clicked += 1;
    }
    if (assigned == 0) return std::nullopt;
    return static_cast<double>(clicked) / static_cast<double>(assigned);
}

inline double overall_click_rate(const std::vector<PanelRow>& rows) {
    if (rows.empty()) {
        throw ValidationError("empty-panel", "no rows to average");
    }
    std::int64_t clicked = 0;
    for (const auto& row : rows) clicked += row.clicked ? 1 : 0;
    return static_cast<double>(clicked) / static_cast<double>(rows.size());
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct ZTestResult {
    double z = 0.0;
    double p_value = 1.0;
};

inline ZTestResult z_test(double estimate, double std_error) {
    if (!(std_error > 0.0)) {
        throw ValidationError("invalid-std-error",
                              "a z-test needs a positive standard error");
    }
    const double z = estimate / std_error;
    return {z, std::erfc(std::abs(z) / std::sqrt(2.0))};
}

struct Coefficient {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

struct RegressionOptions {
    bool week_effects = true;
    bool participant_effects = false;
};

struct RegressionResult {
    std::vector<Coefficient> coefficients;
    std::int64_t n_observations = 0;
    std::int64_t df_residual = 0;
    double sigma2 = 0.0;

    const Coefficient* find(const std::string& name) const {
        for (const auto& c : coefficients) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }
};

// Linear probability model of clicks on arm indicators, with optional week
// indicators and optional participant fixed effects. The lowest arm index
// and the first week label (sorted) are the reference levels. Participant
// effects are absorbed by demeaning within participant; the intercept is
// dropped in that case and the residual degrees of freedom subtract one
// per participant. Standard errors are classical homoskedastic ones.
//
// Rows are sorted internally by content before the design matrix is built,
// so any permutation of the same rows produces identical output.
inline RegressionResult fit_panel_ols(std::vector<PanelRow> rows,
                                      const RegressionOptions& options = {}) {
    if (rows.size() < 3) {
        throw ValidationError("empty-panel",
                              "too few rows to fit a regression");
    }
    for (const auto& row : rows) {
        if (row.arm < 1) {
            throw ValidationError("invalid-panel-row", "arm indices are 1-based");
        }
        if (row.participant_id.empty() || row.week.empty()) {
            throw ValidationError("invalid-panel-row",
                                  "participant and week labels must be non-empty");
        }
    }
    std::sort(rows.begin(), rows.end(), [](const PanelRow& a, const PanelRow& b) {
        return std::tie(a.participant_id, a.week, a.arm, a.clicked) <
               std::tie(b.participant_id, b.week, b.arm, b.clicked);
    });

    std::vector<int> arms;
    std::vector<std::string> weeks;
    for (const auto& row : rows) {
        if (std::find(arms.begin(), arms.end(), row.arm) == arms.end()) {
            arms.push_back(row.arm);
        }
        if (options.week_effects &&
            std::find(weeks.begin(), weeks.end(), row.week) == weeks.end()) {
            weeks.push_back(row.week);
        }
    }
    std::sort(arms.begin(), arms.end());
    std::sort(weeks.begin(), weeks.end());
    if (arms.size() < 2) {
        throw ValidationError("invalid-panel-row",
                              "the panel needs at least two distinct arms");
    }

    std::vector<std::string> names;
    if (!options.participant_effects) names.push_back("intercept");
    for (std::size_t k = 1; k < arms.size(); ++k) {
        names.push_back("arm" + std::to_string(arms[k]));
    }
    for (std::size_t w = 1; w < weeks.size(); ++w) {
        names.push_back("week:" + weeks[w]);
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(names.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
    Eigen::VectorXd y(n);

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        Eigen::Index col = 0;
        if (!options.participant_effects) X(i, col++) = 1.0;
        for (std::size_t k = 1; k < arms.size(); ++k) {
            X(i, col++) = row.arm == arms[k] ? 1.0 : 0.0;
        }
        for (std::size_t w = 1; w < weeks.size(); ++w) {
            X(i, col++) = row.week == weeks[w] ? 1.0 : 0.0;
        }
        y(i) = row.clicked ? 1.0 : 0.0;
    }

    std::int64_t groups = 0;
    if (options.participant_effects) {
        // within transformation: subtract each participant's mean from
        // their rows, in y and in every regressor
        std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> spans;
        Eigen::Index start = 0;
        for (Eigen::Index i = 1; i <= n; ++i) {
            if (i == n || rows[static_cast<std::size_t>(i)].participant_id !=
                              rows[static_cast<std::size_t>(start)].participant_id) {
                spans.emplace(rows[static_cast<std::size_t>(start)].participant_id,
                              std::make_pair(start, i - start));
                start = i;
            }
        }
        groups = static_cast<std::int64_t>(spans.size());
        for (const auto& [pid, span] : spans) {
            const auto [offset, len] = span;
            y.segment(offset, len).array() -= y.segment(offset, len).mean();
            for (Eigen::Index c = 0; c < p; ++c) {
                X.col(c).segment(offset, len).array() -=
                    X.col(c).segment(offset, len).mean();
            }
        }
    }

    const std::int64_t df = static_cast<std::int64_t>(n) - static_cast<std::int64_t>(p) - groups;
    if (df < 1) {
        throw ValidationError("insufficient-data",
                              "no residual degrees of freedom left");
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        const auto& perm = qr.colsPermutation().indices();
        std::string offending;
        for (Eigen::Index j = qr.rank(); j < p; ++j) {
            if (!offending.empty()) offending += ", ";
            offending += names[static_cast<std::size_t>(perm(j))];
        }
        throw ValidationError("singular-design",
                              "collinear columns: " + offending);
    }

    Eigen::VectorXd beta = qr.solve(y);
    Eigen::VectorXd residuals = y - X * beta;
    const double rss = residuals.squaredNorm();
    const double sigma2 = rss / static_cast<double>(df);

    // (X'X)^-1 = P R^-1 R^-T P' from the pivoted factorization X P = Q R
    Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd xtx_inv = qr.colsPermutation() * (Rinv * Rinv.transpose()) *
                              qr.colsPermutation().transpose();

    RegressionResult result;
    result.n_observations = static_cast<std::int64_t>(n);
    result.df_residual = df;
    result.sigma2 = sigma2;
    for (Eigen::Index j = 0; j < p; ++j) {
        Coefficient c;
        c.name = names[static_cast<std::size_t>(j)];
        c.estimate = beta(j);
        c.std_error = std::sqrt(sigma2 * xtx_inv(j, j));
        auto zt = z_test(c.estimate, c.std_error);
        c.z = zt.z;
        c.p_value = zt.p_value;
        result.coefficients.push_back(std::move(c));
    }
    return result;
}

inline nlohmann::json to_json(const RegressionResult& result) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& c : result.coefficients) {
        coeffs.push_back({{"name", c.name},
                          {"estimate", c.estimate},
                          {"std_error", c.std_error},
                          {"z", c.z},
                          {"p_value", c.p_value}});
    }
    return {{"n_observations", result.n_observations},
            {"df_residual", result.df_residual},
            {"sigma2", result.sigma2},
            {"coefficients", std::move(coeffs)}};
}

inline std::string render_regression(const RegressionResult& result) {
    std::ostringstream out;
    out << std::left << std::setw(16) << "term" << std::right << std::setw(10)
        << "estimate" << std::setw(10) << "std.err" << std::setw(9) << "z"
        << std::setw(9) << "p" << '\n';
    for (const auto& c : result.coefficients) {
        out << std::left << std::setw(16) << c.name << std::right << std::fixed
            << std::setprecision(4) << std::setw(10) << c.estimate << std::setw(10)
            << c.std_error << std::setprecision(2) << std::setw(9) << c.z
            << std::setprecision(4) << std::setw(9) << c.p_value << '\n';
        out.unsetf(std::ios::fixed);
    }
    out << "n = " << result.n_observations << ", residual df = " << result.df_residual
        << '\n';
    return out.str();
}

}  // namespace adex
