#pragma once

#include "ilicast/core/errors.hpp"

#include <cmath>
#include <span>

namespace ilicast {

inline double mean_of(std::span<const double> x) {
    if (x.empty()) {
        throw InvalidInput("mean of an empty sample");
    }
    double s = 0.0;
    for (double v : x) {
        s += v;
    }
    return s / static_cast<double>(x.size());
}

/// Population variance (divides by n).
inline double population_variance(std::span<const double> x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) {
        s += (v - m) * (v - m);
    }
    return s / static_cast<double>(x.size());
}

/// Unbiased sample variance (divides by n - 1).
inline double sample_variance(std::span<const double> x) {
    if (x.size() < 2) {
        throw InvalidInput("sample variance needs at least two values");
    }
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) {
        s += (v - m) * (v - m);
    }
    return s / static_cast<double>(x.size() - 1);
}

/// Pearson correlation. Throws InvalidInput when either side is constant.
inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw InvalidInput("pearson: need two equal-length samples of size >= 2");
    }
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        throw InvalidInput("pearson: correlation undefined for a constant series");
    }
    const double r = sab / std::sqrt(saa * sbb);
    return std::fmax(-1.0, std::fmin(1.0, r));
}

inline double normal_pdf(double z) {
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace ilicast
