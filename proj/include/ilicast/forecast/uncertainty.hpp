#pragma once

#include "ilicast/data/date.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace ilicast::forecast {

/// Per-date predictive mean and, for probabilistic models, standard deviation.
struct ProbabilisticForecast {
    std::vector<data::Date> dates;
    std::vector<double> mean;
    std::optional<std::vector<double>> std;
    std::vector<double> truth; // empty when unknown

    std::size_t size() const { return mean.size(); }
    bool probabilistic() const { return std.has_value(); }
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Mixture of K equally weighted Gaussians collapsed to one Gaussian:
/// variance = population variance of the means + mean of the variances.
inline MeanStd combine_uncertainty(std::span<const double> means, std::span<const double> stds) {
    if (means.empty()) {
        throw InvalidInput("combine_uncertainty: no samples");
    }
    if (means.size() != stds.size()) {
        throw InvalidInput("combine_uncertainty: means and stds differ in length");
    }
    // Deviations from the first sample keep identical samples exact (spread 0).
    const double k = static_cast<double>(means.size());
    const double ref = means[0];
    double shift = 0.0;
    for (double v : means) {
        shift += v - ref;
    }
    shift /= k;
    double spread = 0.0;
    double noise = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
        const double d = means[i] - ref - shift;
        spread += d * d;
        noise += stds[i] * stds[i];
    }
    const double m = ref + shift;
    return {m, std::sqrt(spread / k + noise / k)};
}

/// Mean and population standard deviation of sampled means.
inline MeanStd spread_of_means(std::span<const double> means) {
    std::vector<double> zeros(means.size(), 0.0);
    return combine_uncertainty(means, zeros);
}

} // namespace ilicast::forecast
