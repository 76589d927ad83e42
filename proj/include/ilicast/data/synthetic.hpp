#pragma once

// Seed-deterministic stand-in for weekly ILI rates plus daily query
// frequencies. Each season carries one Gaussian-shaped epidemic whose timing
// and intensity are jittered; signal queries track the latent daily rate with a
// lead/lag and multiplicative noise, distractor queries do not.

#include "ilicast/data/series.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace ilicast::data {

struct SyntheticQuery {
    int lag = 0;                  // query(t) follows latent ILI at t - lag (negative = leads)
    double response_noise = 0.1;  // multiplicative noise scale
    bool distractor = false;
};

struct SyntheticConfig {
    int start_year = 2009; // first season starts near August 23 of this year
    int years = 9;
    double peak_day_mean = 140.0; // days after August 23
    double peak_day_jitter = 40.0; // peak offset ~ U[-jitter, +jitter]
    double peak_width = 18.0;      // days (std of the bump)
    double peak_intensity_mean = 30.0;
    double peak_intensity_jitter = 0.5; // relative: intensity * U[1-j, 1+j]
    double baseline = 3.0;
    double noise_scale = 0.06; // multiplicative observation noise on weekly ILI
    double query_drift = 0.03; // relative drift in query volume per year
    std::vector<SyntheticQuery> queries = default_queries();
    std::uint64_t seed = 1;

    static std::vector<SyntheticQuery> default_queries() {
        return {
            {-7, 0.08, false}, {-3, 0.10, false}, {0, 0.05, false}, {-10, 0.15, false},
            {3, 0.12, false},  {0, 0.0, true},    {0, 0.0, true},   {0, 0.0, true},
        };
    }

    void validate() const {
        if (years < 5) {
            throw ConfigurationError("synthetic: years must be >= 5");
        }
        if (!(peak_width > 0.0) || !(peak_intensity_mean >= 0.0) || !(baseline >= 0.0) || !(noise_scale >= 0.0) ||
            !(peak_day_jitter >= 0.0) || peak_intensity_jitter < 0.0 || peak_intensity_jitter >= 1.0) {
            throw ConfigurationError("synthetic: invalid peak/noise parameters");
        }
        for (const auto& q : queries) {
            if (q.response_noise < 0.0 || std::abs(q.lag) > 60) {
                throw ConfigurationError("synthetic: query lag must be within +-60 days and noise >= 0");
            }
        }
    }
};

struct SyntheticData {
    WeeklySeries ili;
    QueryPanel panel;
    std::vector<Date> peak_dates; // realized epidemic peak per season
};

namespace detail {

inline Date first_weekday_on_or_after(Date d, std::chrono::weekday wd) {
    while (std::chrono::weekday{d} != wd) {
        d += Days{1};
    }
    return d;
}

} // namespace detail

inline SyntheticData synthesize(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Weeks run Monday..Sunday; data covers whole weeks from the first season
    // start through five weeks past the last season end.
    const Date first = detail::first_weekday_on_or_after(season_start(cfg.start_year), std::chrono::Monday);
    const Date last = detail::first_weekday_on_or_after(season_end(cfg.start_year + cfg.years - 1) + Days{35},
                                                        std::chrono::Sunday);

    SyntheticData out;
    std::vector<double> peak_offset;
    std::vector<double> intensity;
    for (int s = 0; s < cfg.years + 1; ++s) {
        const double off = cfg.peak_day_mean + cfg.peak_day_jitter * unit(rng);
        const double amp = cfg.peak_intensity_mean * (1.0 + cfg.peak_intensity_jitter * unit(rng));
        peak_offset.push_back(off);
        intensity.push_back(amp);
        out.peak_dates.push_back(season_start(cfg.start_year + s) + Days{static_cast<long>(std::lround(off))});
    }
    out.peak_dates.resize(static_cast<std::size_t>(cfg.years));

    // Latent daily rate, defined on any date.
    auto latent = [&](Date d) {
        double v = cfg.baseline;
        for (int s = 0; s < cfg.years + 1; ++s) {
            const double centre = static_cast<double>(days_between(season_start(cfg.start_year + s), d));
            const double z = (centre - peak_offset[static_cast<std::size_t>(s)]) / cfg.peak_width;
            v += intensity[static_cast<std::size_t>(s)] * std::exp(-0.5 * z * z);
        }
        return v;
    };

    std::vector<Date> week_ends;
    std::vector<double> weekly;
    for (Date we = first + Days{6}; we <= last; we += Days{7}) {
        double acc = 0.0;
        for (int k = 0; k < 7; ++k) {
            acc += latent(we - Days{k});
        }
        const double v = (acc / 7.0) * (1.0 + cfg.noise_scale * normal(rng));
        week_ends.push_back(we);
        weekly.push_back(std::max(0.0, v));
    }
    out.ili = WeeklySeries(std::move(week_ends), std::move(weekly));

    const auto n_days = static_cast<std::size_t>(days_between(first, last) + 1);
    std::vector<std::string> ids;
    std::vector<DailySeries> series;
    for (std::size_t q = 0; q < cfg.queries.size(); ++q) {
        const auto& spec = cfg.queries[q];
        std::vector<double> vals(n_days);
        if (spec.distractor) {
            const double period = 29.0 + 32.0 * (0.5 + 0.5 * unit(rng));
            const double phase = std::numbers::pi * unit(rng);
            double ar = 0.0;
            for (std::size_t i = 0; i < n_days; ++i) {
                ar = 0.9 * ar + 0.1 * normal(rng);
                const double wave = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period + phase);
                vals[i] = 1.0 + 0.3 * wave + ar;
            }
            ids.push_back("distractor_" + std::to_string(q));
        } else {
            const double scale = 0.5 + 0.25 * (1.0 + unit(rng));
            for (std::size_t i = 0; i < n_days; ++i) {
                const Date d = first + Days{static_cast<long>(i)};
                const double years_in = static_cast<double>(i) / 365.25;
                const double level = scale * latent(d - Days{spec.lag}) * (1.0 + cfg.query_drift * years_in);
                vals[i] = std::max(0.0, level * (1.0 + spec.response_noise * normal(rng)));
            }
            ids.push_back("flu_query_" + std::to_string(q));
        }
        series.emplace_back(first, std::move(vals));
    }
    out.panel = QueryPanel(std::move(ids), std::move(series));
    return out;
}

} // namespace ilicast::data
