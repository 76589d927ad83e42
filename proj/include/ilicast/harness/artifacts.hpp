#pragma once

// Plot-ready forecast files: `date,truth,mean,std`, std empty for point
// forecasts. They load back through the ordinary CSV reader.

#include "ilicast/data/csv.hpp"
#include "ilicast/forecast/uncertainty.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

namespace ilicast::harness {

/// Raised when a manifest refers to an artifact that is missing or malformed.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void save_forecast_csv(const forecast::ProbabilisticForecast& f, const std::filesystem::path& path) {
    if (f.dates.size() != f.mean.size() || (!f.truth.empty() && f.truth.size() != f.mean.size())) {
        throw InvalidInput("save_forecast_csv: dates, truth and mean differ in length");
    }
    data::CsvTable t;
    t.columns = {"truth", "mean", "std"};
    t.dates = f.dates;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < f.size(); ++i) {
        t.rows.push_back({f.truth.empty() ? nan : f.truth[i], f.mean[i], f.std ? (*f.std)[i] : nan});
    }
    data::write_csv_table(path, t);
}

inline forecast::ProbabilisticForecast load_forecast_csv(const std::filesystem::path& path) {
    const auto t = data::read_csv_table(path);
    if (t.columns != std::vector<std::string>{"truth", "mean", "std"}) {
        throw IntegrityError(path.string() + ": expected columns date,truth,mean,std");
    }
    forecast::ProbabilisticForecast f;
    f.dates = t.dates;
    bool any_std = false;
    bool all_std = true;
    bool all_truth = true;
    std::vector<double> sd;
    for (const auto& row : t.rows) {
        f.truth.push_back(row[0]);
        f.mean.push_back(row[1]);
        sd.push_back(row[2]);
        all_truth = all_truth && !std::isnan(row[0]);
        any_std = any_std || !std::isnan(row[2]);
        all_std = all_std && !std::isnan(row[2]);
        if (std::isnan(row[1])) {
            throw IntegrityError(path.string() + ": missing mean on " + data::format_date(f.dates[f.mean.size() - 1]));
        }
    }
    if (any_std && !all_std) {
        throw IntegrityError(path.string() + ": std column is only partly filled");
    }
    if (any_std) {
        f.std = std::move(sd);
    }
    if (!all_truth) {
        f.truth.clear();
    }
    return f;
}

} // namespace ilicast::harness
