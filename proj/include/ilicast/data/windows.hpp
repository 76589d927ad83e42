#pragma once

#include "ilicast/data/series.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ilicast::data {

using RealMatrix = Eigen::MatrixXd;

/// Lag/delay/horizon of a supervised window, in days.
struct WindowShape {
    int lookback = 28; // days of history per row
    int delay = 7;     // ILI reporting delay
    int horizon = 14;  // days ahead of the origin being forecast
};

struct WindowSample {
    RealMatrix x; // (m + 1) x lookback; rows 0..m-1 queries, row m ILI
    double y = 0.0;
    Date origin{};
    Date target{};
};

struct WindowedDataset {
    std::vector<WindowSample> samples;
    WindowShape shape;
    std::vector<std::string> query_ids;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    std::size_t query_count() const { return query_ids.size(); }
    std::size_t input_rows() const { return query_ids.size() + 1; }
};

/// Input matrix for origin `t`: each query over the `lookback` days ending at t,
/// then ILI over the `lookback` days ending at t - delay.
inline RealMatrix window_at(const DailySeries& ili, const QueryPanel& panel, Date t, const WindowShape& shape) {
    if (shape.lookback < 1 || shape.delay < 0) {
        throw InvalidParameter("window: lookback must be >= 1 and delay >= 0");
    }
    const auto m = static_cast<Eigen::Index>(panel.size());
    RealMatrix x(m + 1, shape.lookback);
    for (int col = 0; col < shape.lookback; ++col) {
        const Date qday = t - Days{shape.lookback - 1 - col};
        for (Eigen::Index q = 0; q < m; ++q) {
            const auto& s = panel[static_cast<std::size_t>(q)];
            if (!s.contains(qday)) {
                throw DataGapError("query '" + panel.ids()[static_cast<std::size_t>(q)] + "' has no value for " +
                                   format_date(qday));
            }
            x(q, col) = s.at(qday);
        }
        const Date iday = qday - Days{shape.delay};
        if (!ili.contains(iday)) {
            throw DataGapError("ILI series has no value for " + format_date(iday));
        }
        x(m, col) = ili.at(iday);
    }
    return x;
}

/// One sample per origin date in [from, to]; target is ILI(origin + horizon).
inline WindowedDataset build_windows(const DailySeries& ili, const QueryPanel& panel, const WindowShape& shape,
                                     Date from, Date to) {
    if (shape.horizon < 0) {
        throw InvalidParameter("build_windows: horizon must be >= 0");
    }
    if (to < from) {
        throw InvalidInput("build_windows: empty period");
    }
    WindowedDataset ds;
    ds.shape = shape;
    ds.query_ids = panel.ids();
    ds.samples.reserve(static_cast<std::size_t>(days_between(from, to) + 1));
    for (Date t = from; t <= to; t += Days{1}) {
        WindowSample s;
        s.x = window_at(ili, panel, t, shape);
        s.origin = t;
        s.target = t + Days{shape.horizon};
        if (!ili.contains(s.target)) {
            throw DataGapError("ILI series has no target value for " + format_date(s.target));
        }
        s.y = ili.at(s.target);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

/// Concatenates the columns of `x`.
inline Eigen::VectorXd flatten_column_major(const RealMatrix& x) {
    // Eigen's default storage is column-major.
    return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

inline RealMatrix unflatten_column_major(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) {
        throw ShapeError("unflatten: size " + std::to_string(v.size()) + " does not match " + std::to_string(rows) +
                         "x" + std::to_string(cols));
    }
    return Eigen::Map<const RealMatrix>(v.data(), rows, cols);
}

} // namespace ilicast::data
