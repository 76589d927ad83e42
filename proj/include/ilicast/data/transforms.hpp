#pragma once

#include "ilicast/core/log.hpp"
#include "ilicast/core/stats.hpp"
#include "ilicast/data/series.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace ilicast::data {

/// Anchors each weekly value on the Thursday of its week and interpolates
/// linearly between Thursdays. Days before the first / after the last Thursday
/// repeat the nearest weekly value. The result spans the first week's first
/// day to the last week-ending date.
inline DailySeries weekly_to_daily(const WeeklySeries& weekly) {
    if (weekly.size() < 2) {
        throw InsufficientData("weekly_to_daily: need at least two weeks");
    }
    const auto& dates = weekly.dates();
    const auto& vals = weekly.values();
    std::vector<Date> anchors;
    anchors.reserve(dates.size());
    for (Date d : dates) {
        anchors.push_back(thursday_of_week_ending(d));
    }
    const Date first = dates.front() - Days{6};
    const Date last = dates.back();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(days_between(first, last) + 1));
    std::size_t w = 0;
    for (Date d = first; d <= last; d += Days{1}) {
        if (d <= anchors.front()) {
            out.push_back(vals.front());
            continue;
        }
        if (d >= anchors.back()) {
            out.push_back(vals.back());
            continue;
        }
        while (anchors[w + 1] <= d) {
            ++w;
        }
        const double frac = static_cast<double>(days_between(anchors[w], d)) / 7.0;
        out.push_back(vals[w] + (vals[w + 1] - vals[w]) * frac);
    }
    return DailySeries(first, std::move(out));
}

/// Weights 1/(lag+1) for lag = 0..window-1, normalized to sum to one.
inline std::vector<double> harmonic_weights(std::size_t window) {
    std::vector<double> w(window);
    for (std::size_t d = 0; d < window; ++d) {
        w[d] = 1.0 / static_cast<double>(d + 1);
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) {
        v /= total;
    }
    return w;
}

/// Harmonic weighted average over the trailing `window` days. The first
/// window-1 days use the available lags with renormalized weights.
inline DailySeries harmonic_smooth(const DailySeries& s, std::size_t window = 7) {
    if (window == 0) {
        throw InvalidParameter("harmonic_smooth: window must be positive");
    }
    if (s.size() < window) {
        throw InsufficientData("harmonic_smooth: series of length " + std::to_string(s.size()) +
                               " is shorter than the window " + std::to_string(window));
    }
    std::vector<double> raw(window);
    for (std::size_t d = 0; d < window; ++d) {
        raw[d] = 1.0 / static_cast<double>(d + 1);
    }
    std::vector<double> out(s.size());
    for (std::size_t t = 0; t < s.size(); ++t) {
        const std::size_t lags = std::min(window, t + 1);
        double acc = 0.0;
        double norm = 0.0;
        for (std::size_t d = 0; d < lags; ++d) {
            acc += raw[d] * s[t - d];
            norm += raw[d];
        }
        out[t] = acc / norm;
    }
    return DailySeries(s.start(), std::move(out));
}

class ConstantSeriesError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

struct MinMax {
    double min = 0.0;
    double max = 1.0;

    double apply(double v) const { return (v - min) / (max - min); }
};

/// Min and max of `s` over [from, to].
inline MinMax fit_minmax(const DailySeries& s, Date from, Date to) {
    const auto window = s.slice(from, to);
    const auto [lo, hi] = std::minmax_element(window.values().begin(), window.values().end());
    if (*lo == *hi) {
        throw ConstantSeriesError("min-max normalization: series is constant over " + window.range_text());
    }
    return MinMax{*lo, *hi};
}

inline DailySeries apply_minmax(const DailySeries& s, const MinMax& mm) {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = mm.apply(s[i]);
    }
    return DailySeries(s.start(), std::move(out));
}

struct NormalizedSeries {
    DailySeries series;
    MinMax stats;
};

/// (v - min) / (max - min) with min/max taken from [fit_from, fit_to] only.
inline NormalizedSeries minmax_normalize(const DailySeries& s, Date fit_from, Date fit_to) {
    const MinMax mm = fit_minmax(s, fit_from, fit_to);
    return {apply_minmax(s, mm), mm};
}

struct NormalizedPanel {
    QueryPanel panel;
    std::vector<MinMax> stats;
    std::vector<std::string> dropped;
};

/// Normalizes every query on [fit_from, fit_to]; constant queries are dropped.
inline NormalizedPanel minmax_normalize(const QueryPanel& panel, Date fit_from, Date fit_to) {
    NormalizedPanel out;
    std::vector<std::string> ids;
    std::vector<DailySeries> series;
    for (std::size_t q = 0; q < panel.size(); ++q) {
        try {
            auto n = minmax_normalize(panel[q], fit_from, fit_to);
            ids.push_back(panel.ids()[q]);
            series.push_back(std::move(n.series));
            out.stats.push_back(n.stats);
        } catch (const ConstantSeriesError&) {
            log::warn("dropping constant query '" + panel.ids()[q] + "'");
            out.dropped.push_back(panel.ids()[q]);
        }
    }
    out.panel = QueryPanel(std::move(ids), std::move(series));
    return out;
}

inline QueryPanel harmonic_smooth(const QueryPanel& panel, std::size_t window = 7) {
    std::vector<DailySeries> series;
    series.reserve(panel.size());
    for (const auto& s : panel.series()) {
        series.push_back(harmonic_smooth(s, window));
    }
    return QueryPanel(panel.ids(), std::move(series));
}

struct QuerySelection {
    QueryPanel panel;
    std::vector<double> correlations; // aligned with panel ids
};

/// Keeps queries whose Pearson correlation with `ili` over [from, to] is at
/// least `threshold`, ordered by descending correlation (ties keep input order).
inline QuerySelection select_queries(const QueryPanel& panel, const DailySeries& ili, Date from, Date to,
                                     double threshold = 0.3) {
    const auto target = ili.slice(from, to);
    struct Scored {
        std::size_t index;
        double r;
    };
    std::vector<Scored> kept;
    for (std::size_t q = 0; q < panel.size(); ++q) {
        const auto window = panel[q].slice(from, to);
        double r = 0.0;
        try {
            r = pearson(window.values(), target.values());
        } catch (const InvalidInput&) {
            continue;
        }
        if (r >= threshold) {
            kept.push_back({q, r});
        }
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Scored& a, const Scored& b) { return a.r > b.r; });
    std::vector<std::string> ids;
    std::vector<DailySeries> series;
    QuerySelection out;
    for (const auto& k : kept) {
        ids.push_back(panel.ids()[k.index]);
        series.push_back(panel[k.index]);
        out.correlations.push_back(k.r);
    }
    if (kept.empty()) {
        log::warn("query selection kept no queries (threshold " + std::to_string(threshold) + ")");
    }
    out.panel = QueryPanel(std::move(ids), std::move(series));
    return out;
}

/// Restricts a panel to `ids`, in that order.
inline QueryPanel subset(const QueryPanel& panel, const std::vector<std::string>& ids) {
    std::vector<DailySeries> series;
    for (const auto& id : ids) {
        series.push_back(panel[panel.find(id)]);
    }
    return QueryPanel(ids, std::move(series));
}

} // namespace ilicast::data
