#pragma once

// Point and probabilistic forecast scores.

#include "ilicast/core/errors.hpp"
#include "ilicast/core/stats.hpp"
#include "ilicast/train/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace ilicast::metrics {

struct PointMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    double smape = 0.0;
    double r = 0.0;
};

inline void require_pair(std::span<const double> y, std::span<const double> y_hat, const char* what,
                         std::size_t min_len = 1) {
    if (y.size() != y_hat.size()) {
        throw InvalidInput(std::string(what) + ": series lengths differ");
    }
    if (y.size() < min_len) {
        throw InvalidInput(std::string(what) + ": need at least " + std::to_string(min_len) + " points");
    }
}

inline double mae(std::span<const double> y, std::span<const double> y_hat) {
    require_pair(y, y_hat, "mae");
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        s += std::abs(y[t] - y_hat[t]);
    }
    return s / static_cast<double>(y.size());
}

inline double rmse(std::span<const double> y, std::span<const double> y_hat) {
    require_pair(y, y_hat, "rmse");
    return std::sqrt(train::mse_loss(y, y_hat));
}

/// (100/T) sum |e| / ((|y| + |y_hat|) / 2), with 0/0 terms counted as 0.
inline double smape(std::span<const double> y, std::span<const double> y_hat) {
    require_pair(y, y_hat, "smape");
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double denom = (std::abs(y[t]) + std::abs(y_hat[t])) / 2.0;
        if (denom > 0.0) {
            s += std::abs(y[t] - y_hat[t]) / denom;
        }
    }
    return 100.0 * s / static_cast<double>(y.size());
}

inline PointMetrics point_metrics(std::span<const double> y, std::span<const double> y_hat) {
    require_pair(y, y_hat, "point_metrics", 2);
    return {mae(y, y_hat), rmse(y, y_hat), smape(y, y_hat), pearson(y, y_hat)};
}

/// Centered moving average of odd width; near the edges the window is
/// truncated and the average taken over the points that exist.
inline std::vector<double> centered_moving_average(std::span<const double> x, std::size_t window) {
    if (window == 0 || window % 2 == 0) {
        throw InvalidParameter("moving average: window must be odd and positive");
    }
    if (window > x.size()) {
        throw InvalidInput("moving average: window of " + std::to_string(window) + " exceeds series length " +
                           std::to_string(x.size()));
    }
    const std::size_t half = window / 2;
    std::vector<double> out(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        const std::size_t lo = t >= half ? t - half : 0;
        const std::size_t hi = std::min(x.size() - 1, t + half);
        double s = 0.0;
        for (std::size_t i = lo; i <= hi; ++i) {
            s += x[i];
        }
        out[t] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

/// Index of the largest value; the earliest wins ties.
inline std::size_t first_argmax(std::span<const double> x) {
    return static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
}

/// Smoothed delay-to-peak in days (daily series): positive when the forecast
/// peaks late.
inline long sdp(std::span<const double> y, std::span<const double> y_hat, std::size_t window = 15) {
    require_pair(y, y_hat, "sdp");
    const auto sy = centered_moving_average(y, window);
    const auto sp = centered_moving_average(y_hat, window);
    return static_cast<long>(first_argmax(sp)) - static_cast<long>(first_argmax(sy));
}

/// CRPS of N(mu, sigma) at y: sigma [z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)].
inline double crps_gaussian(double y, double mu, double sigma) {
    if (sigma < 0.0 || std::isnan(sigma)) {
        throw InvalidParameter("crps_gaussian: sigma must be >= 0");
    }
    const double e = y - mu;
    if (sigma == 0.0) {
        return std::abs(e);
    }
    const double z = e / sigma;
    const double v = sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - 1.0 / std::sqrt(std::numbers::pi));
    return std::max(v, 0.0);
}

/// Mean CRPS over a series.
inline double crps_gaussian(std::span<const double> y, std::span<const double> y_hat,
                            std::span<const double> sigma) {
    require_pair(y, y_hat, "crps_gaussian");
    require_pair(y, sigma, "crps_gaussian");
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        s += crps_gaussian(y[t], y_hat[t], sigma[t]);
    }
    return s / static_cast<double>(y.size());
}

/// Mean Gaussian negative log likelihood (same definition as the training loss).
inline double nll_metric(std::span<const double> y, std::span<const double> y_hat, std::span<const double> sigma) {
    return train::gaussian_nll(y, y_hat, sigma);
}

} // namespace ilicast::metrics
