#pragma once

#include "ilicast/core/errors.hpp"
#include "ilicast/core/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

namespace ilicast::metrics {

struct SignificanceResult {
    std::string model_a;
    std::string model_b;
    std::string metric;
    double t = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    double threshold = 0.05; // alpha / comparisons
    bool significant = false;
};

/// Welch two-sample, two-tailed t-test with Bonferroni correction over
/// `comparisons` tests.
inline SignificanceResult significance(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                                       int comparisons = 1) {
    if (a.size() < 2 || b.size() < 2) {
        throw InvalidInput("significance: each side needs at least 2 samples");
    }
    if (!(alpha > 0.0 && alpha < 1.0) || comparisons < 1) {
        throw InvalidParameter("significance: alpha must be in (0, 1) and comparisons >= 1");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a) / na;
    const double vb = sample_variance(b) / nb;
    const double diff = mean_of(a) - mean_of(b);
    SignificanceResult r;
    r.threshold = alpha / comparisons;
    const double se2 = va + vb;
    if (se2 == 0.0) {
        r.t = diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
        r.dof = na + nb - 2.0;
        r.p_value = diff == 0.0 ? 1.0 : 0.0;
    } else {
        r.t = diff / std::sqrt(se2);
        r.dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
        const boost::math::students_t dist(r.dof);
        r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))), 0.0, 1.0);
    }
    r.significant = r.p_value <= r.threshold;
    return r;
}

} // namespace ilicast::metrics
