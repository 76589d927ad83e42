#pragma once

#include "ilicast/core/errors.hpp"
#include "ilicast/core/log.hpp"
#include "ilicast/forecast/uncertainty.hpp"
#include "ilicast/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ilicast::metrics {

/// Scores of one model at one horizon (one season or a season average).
struct MetricsRow {
    std::string model;
    int gamma = 0;
    std::optional<double> crps; // absent for point forecasts
    std::optional<double> nll;
    double mae = 0.0;
    double rmse = 0.0;
    double smape = 0.0;
    double r = 0.0;
    double sdp = 0.0; // signed per season, |SDP| once aggregated

    bool probabilistic() const { return crps.has_value(); }
};

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"CRPS", "NLL", "MAE", "RMSE", "SMAPE", "r", "SDP"};
    return names;
}

/// Value of the named metric, or nullopt when the row does not carry it.
inline std::optional<double> metric_value(const MetricsRow& row, const std::string& name) {
    if (name == "CRPS") return row.crps;
    if (name == "NLL") return row.nll;
    if (name == "MAE") return row.mae;
    if (name == "RMSE") return row.rmse;
    if (name == "SMAPE") return row.smape;
    if (name == "r") return row.r;
    if (name == "SDP") return row.sdp;
    throw InvalidInput("unknown metric '" + name + "'");
}

/// Scores a one-season forecast against its truth. Standard deviations are
/// floored at `std_floor` before the probabilistic scores. An undefined
/// correlation (constant forecast) is reported as NaN with a warning.
inline MetricsRow score_forecast(const forecast::ProbabilisticForecast& f, const std::string& model, int gamma,
                                 double std_floor = 1e-6, std::size_t sdp_window = 15) {
    if (f.truth.size() != f.mean.size()) {
        throw InvalidInput("score: forecast for '" + model + "' lacks truth values");
    }
    MetricsRow row;
    row.model = model;
    row.gamma = gamma;
    row.mae = mae(f.truth, f.mean);
    row.rmse = rmse(f.truth, f.mean);
    row.smape = smape(f.truth, f.mean);
    try {
        row.r = pearson(f.truth, f.mean);
    } catch (const InvalidInput& e) {
        log::warn("score '" + model + "': " + e.what());
        row.r = std::numeric_limits<double>::quiet_NaN();
    }
    row.sdp = static_cast<double>(sdp(f.truth, f.mean, std::min(sdp_window, f.size() - (f.size() + 1) % 2)));
    if (f.std) {
        std::vector<double> sd(*f.std);
        for (double& s : sd) {
            s = std::max(s, std_floor);
        }
        row.crps = crps_gaussian(f.truth, f.mean, sd);
        row.nll = nll_metric(f.truth, f.mean, sd);
    }
    return row;
}

/// Mean of each metric across seasons, with SDP averaged in absolute value.
inline MetricsRow aggregate_report(const std::vector<MetricsRow>& seasons) {
    if (seasons.empty()) {
        throw InvalidInput("aggregate_report: no seasons");
    }
    const MetricsRow& first = seasons.front();
    MetricsRow out;
    out.model = first.model;
    out.gamma = first.gamma;
    const double n = static_cast<double>(seasons.size());
    double crps = 0.0;
    double nll = 0.0;
    for (const auto& row : seasons) {
        if (row.gamma != first.gamma) {
            throw InvalidInput("aggregate_report: rows mix horizons " + std::to_string(first.gamma) + " and " +
                               std::to_string(row.gamma));
        }
        if (row.probabilistic() != first.probabilistic()) {
            throw InvalidInput("aggregate_report: rows mix point and probabilistic forecasts");
        }
        out.mae += row.mae / n;
        out.rmse += row.rmse / n;
        out.smape += row.smape / n;
        out.r += row.r / n;
        out.sdp += std::abs(row.sdp) / n;
        if (row.probabilistic()) {
            crps += *row.crps / n;
            nll += *row.nll / n;
        }
    }
    if (first.probabilistic()) {
        out.crps = crps;
        out.nll = nll;
    }
    return out;
}

} // namespace ilicast::metrics
