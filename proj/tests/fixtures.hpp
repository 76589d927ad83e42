#pragma once

// Small synthetic datasets shared by the test binaries.

#include "ilicast/data/synthetic.hpp"
#include "ilicast/data/transforms.hpp"
#include "ilicast/data/windows.hpp"

#include <cstdint>

namespace fixtures {

using namespace ilicast;

/// Training windows from the default synthetic generator, ending before the
/// season starting in `last_season`. Queries are smoothed, normalized and
/// selected on the same period.
inline data::WindowedDataset synthetic_windows(int last_season = 2011, std::uint64_t seed = 1, int horizon = 14) {
    data::SyntheticConfig cfg;
    cfg.seed = seed;
    const auto d = data::synthesize(cfg);
    const auto ili = data::weekly_to_daily(d.ili);
    const auto panel = data::harmonic_smooth(d.panel);
    const data::Date from = panel[0].start() + data::Days{40};
    const data::Date season = data::season_start(last_season);
    const auto norm = data::minmax_normalize(panel, panel[0].start(), season - data::Days{1});
    const auto sel = data::select_queries(norm.panel, ili, from, season - data::Days{1});
    const data::WindowShape shape{28, 7, horizon};
    return data::build_windows(ili, sel.panel, shape, from, season - data::Days{1 + horizon});
}

/// Daily series holding `values` from 2020-01-01.
inline data::DailySeries series(std::vector<double> values, data::Date start = data::make_date(2020, 1, 1)) {
    return data::DailySeries(start, std::move(values));
}

} // namespace fixtures
