#pragma once

// Query preprocessing fitted on a training period and replayable later:
// harmonic smoothing, min-max normalization and correlation selection.

#include "ilicast/data/transforms.hpp"

#include <string>
#include <vector>

namespace ilicast::data {

struct PrepOptions {
    std::size_t smoothing_window = 7;
    bool smooth_before_normalize = true;
    double selection_threshold = 0.3;
    bool use_queries = true;
};

/// Everything needed to turn a raw query panel into model inputs.
struct PrepState {
    PrepOptions options;
    Date fit_from{};                    // statistics use [fit_from, fit_to] only
    Date fit_to{};
    std::vector<std::string> query_ids; // selected, in model row order
    std::vector<MinMax> stats;          // aligned with query_ids
    std::vector<double> correlations;   // aligned with query_ids

    /// Replays smoothing and normalization on `raw` for the selected queries.
    QueryPanel apply(const QueryPanel& raw) const {
        if (query_ids.empty()) {
            return {};
        }
        const QueryPanel chosen = subset(raw, query_ids);
        std::vector<DailySeries> out;
        for (std::size_t q = 0; q < chosen.size(); ++q) {
            DailySeries s = chosen[q];
            if (options.smooth_before_normalize) {
                s = apply_minmax(harmonic_smooth(s, options.smoothing_window), stats[q]);
            } else {
                s = harmonic_smooth(apply_minmax(s, stats[q]), options.smoothing_window);
            }
            out.push_back(std::move(s));
        }
        return QueryPanel(query_ids, std::move(out));
    }
};

/// Fits normalization and selection on [fit_from, fit_to]. Smoothing is
/// causal, so smoothing the whole series first reads nothing after a date.
inline PrepState fit_prep(const QueryPanel& raw, const DailySeries& ili, Date fit_from, Date fit_to,
                          const PrepOptions& options = {}) {
    PrepState state;
    state.options = options;
    state.fit_from = fit_from;
    state.fit_to = fit_to;
    if (!options.use_queries || raw.empty()) {
        return state;
    }
    QueryPanel normalized;
    std::vector<MinMax> stats;
    std::vector<std::string> ids;
    if (options.smooth_before_normalize) {
        auto n = minmax_normalize(harmonic_smooth(raw, options.smoothing_window), fit_from, fit_to);
        normalized = std::move(n.panel);
        stats = std::move(n.stats);
    } else {
        auto n = minmax_normalize(raw, fit_from, fit_to);
        normalized = harmonic_smooth(n.panel, options.smoothing_window);
        stats = std::move(n.stats);
    }
    const auto selection = select_queries(normalized, ili, fit_from, fit_to, options.selection_threshold);
    state.query_ids = selection.panel.ids();
    state.correlations = selection.correlations;
    for (const auto& id : state.query_ids) {
        state.stats.push_back(stats[normalized.find(id)]);
    }
    return state;
}

} // namespace ilicast::data
