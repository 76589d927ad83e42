#pragma once

#include "ilicast/core/errors.hpp"
#include "ilicast/core/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <span>
#include <vector>

namespace ilicast::metrics {

struct CalibrationCurve {
    std::vector<double> levels;   // nominal two-sided confidence
    std::vector<double> coverage; // fraction of truths inside the interval
};

/// Two-sided confidence of a +/- k sigma interval: 2 Phi(k) - 1.
inline double level_for_sigmas(double k) { return 2.0 * normal_cdf(k) - 1.0; }

/// Levels for 0, 0.1, ..., 3.0 sigma (0 to about 0.997).
inline std::vector<double> default_levels() {
    std::vector<double> out;
    for (int i = 0; i <= 30; ++i) {
        out.push_back(level_for_sigmas(0.1 * i));
    }
    return out;
}

/// Half-width in sigmas of the central interval with confidence `level`.
inline double sigmas_for_level(double level) {
    if (!(level >= 0.0) || !(level < 1.0)) {
        throw InvalidParameter("calibration: levels must lie in [0, 1)");
    }
    if (level == 0.0) {
        return 0.0;
    }
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, (1.0 + level) / 2.0);
}

inline double coverage_at(std::span<const double> y, std::span<const double> y_hat, std::span<const double> sigma,
                          double level) {
    if (y.size() != y_hat.size() || y.size() != sigma.size()) {
        throw InvalidInput("calibration: series lengths differ");
    }
    if (y.empty()) {
        throw InvalidInput("calibration: empty series");
    }
    const double z = sigmas_for_level(level);
    std::size_t inside = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (std::abs(y[t] - y_hat[t]) <= z * sigma[t]) {
            ++inside;
        }
    }
    return static_cast<double>(inside) / static_cast<double>(y.size());
}

inline CalibrationCurve calibration_curve(std::span<const double> y, std::span<const double> y_hat,
                                          std::span<const double> sigma,
                                          const std::vector<double>& levels = default_levels()) {
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (!(levels[i] > levels[i - 1])) {
            throw InvalidParameter("calibration: levels must be strictly increasing");
        }
    }
    CalibrationCurve c;
    c.levels = levels;
    for (double level : levels) {
        c.coverage.push_back(coverage_at(y, y_hat, sigma, level));
    }
    return c;
}

/// Mean |coverage - level| over the given levels.
inline double calibration_error(std::span<const double> y, std::span<const double> y_hat,
                                std::span<const double> sigma, const std::vector<double>& levels) {
    if (levels.empty()) {
        throw InvalidParameter("calibration_error: no levels");
    }
    double s = 0.0;
    for (double level : levels) {
        s += std::abs(coverage_at(y, y_hat, sigma, level) - level);
    }
    return s / static_cast<double>(levels.size());
}

} // namespace ilicast::metrics
