#pragma once

// Naive persistence and historical-average baselines.

#include "ilicast/core/errors.hpp"
#include "ilicast/core/stats.hpp"
#include "ilicast/data/date.hpp"
#include "ilicast/data/series.hpp"
#include "ilicast/forecast/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace ilicast::forecast {

/// Standard deviation floor applied to baseline spreads before scoring.
inline constexpr double kStdFloor = 1e-6;

/// Persistence forecast for origin + gamma: the latest ILI value available at
/// the origin, ili(origin - delay). `gamma` does not influence the value.
inline double naive_forecast(const data::DailySeries& ili, data::Date origin, int gamma, int delay) {
    if (gamma < 0 || delay < 0) {
        throw InvalidParameter("naive_forecast: gamma and delay must be >= 0");
    }
    return ili.at(origin - data::Days{delay});
}

/// Naive forecasts for each origin in [from, to]; dates are origin + gamma.
inline ProbabilisticForecast naive_forecast(const data::DailySeries& ili, data::Date from, data::Date to, int gamma,
                                            int delay) {
    ProbabilisticForecast f;
    for (data::Date t = from; t <= to; t += data::Days{1}) {
        f.dates.push_back(t + data::Days{gamma});
        f.mean.push_back(naive_forecast(ili, t, gamma, delay));
    }
    return f;
}

/// Mean and population std of the ILI rate on the same calendar day in every
/// earlier year covered by `ili` (29 Feb maps to 28 Feb in common years).
inline MeanStd historical_average(const data::DailySeries& ili, data::Date target) {
    std::vector<double> values;
    const int year = data::year_of(target);
    for (int y = data::year_of(ili.start()); y < year; ++y) {
        const data::Date d = data::same_day_in_year(target, y);
        if (ili.contains(d)) {
            values.push_back(ili.at(d));
        }
    }
    if (values.size() < 2) {
        throw InsufficientData("historical_average: " + data::format_date(target) + " has " +
                               std::to_string(values.size()) + " prior year(s), need 2");
    }
    return {mean_of(values), std::sqrt(population_variance(values))};
}

/// Historical-average forecasts for targets origin + gamma over origins in
/// [from, to], with the std floored for scoring.
inline ProbabilisticForecast historical_forecast(const data::DailySeries& ili, data::Date from, data::Date to,
                                                 int gamma) {
    ProbabilisticForecast f;
    std::vector<double> sd;
    for (data::Date t = from; t <= to; t += data::Days{1}) {
        const data::Date target = t + data::Days{gamma};
        const MeanStd ms = historical_average(ili, target);
        f.dates.push_back(target);
        f.mean.push_back(ms.mean);
        sd.push_back(std::max(ms.std, kStdFloor));
    }
    f.std = std::move(sd);
    return f;
}

} // namespace ilicast::forecast
