#pragma once

#include "ilicast/bayes/bayes_layer.hpp"
#include "ilicast/nn/tape.hpp"

#include <cmath>
#include <numbers>
#include <span>

namespace ilicast::train {

using nn::Var;

enum class LossKind { mse, gaussian_nll, negative_elbo };

inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw InvalidInput(std::string(what) + ": series lengths differ");
    }
    if (a == 0) {
        throw InvalidInput(std::string(what) + ": empty series");
    }
}

/// (1/T) sum (y - y_hat)^2
inline double mse_loss(std::span<const double> y, std::span<const double> y_hat) {
    require_same_length(y.size(), y_hat.size(), "mse_loss");
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        s += (y[t] - y_hat[t]) * (y[t] - y_hat[t]);
    }
    return s / static_cast<double>(y.size());
}

/// (1/T) sum [ (y - y_hat)^2 / (2 s^2) + 0.5 ln(2 pi s^2) ]
inline double gaussian_nll(std::span<const double> y, std::span<const double> y_hat,
                           std::span<const double> sigma) {
    require_same_length(y.size(), y_hat.size(), "gaussian_nll");
    require_same_length(y.size(), sigma.size(), "gaussian_nll");
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (!(sigma[t] > 0.0)) {
            throw InvalidParameter("gaussian_nll: standard deviations must be > 0");
        }
        const double e = y[t] - y_hat[t];
        s += e * e / (2.0 * sigma[t] * sigma[t]) + 0.5 * std::log(2.0 * std::numbers::pi * sigma[t] * sigma[t]);
    }
    return s / static_cast<double>(y.size());
}

/// Single-sample negative ELBO: Gaussian NLL of the sampled prediction plus
/// the KL between weight posterior and prior, scaled by `kl_weight`.
inline double negative_elbo(std::span<const double> y, std::span<const double> y_hat,
                            std::span<const double> sigma, const bayes::GaussianWeightDistribution& q,
                            const bayes::GaussianWeightDistribution& p, double kl_weight = 1.0) {
    return gaussian_nll(y, y_hat, sigma) + kl_weight * bayes::kl_gaussian(q, p);
}

// Tape forms; predictions and targets are 1 x B rows.

inline Var mse(Var y_hat, Var y) { return nn::mean(nn::square(nn::sub(y, y_hat))); }

inline Var gaussian_nll(Var y_hat, Var sigma, Var y) {
    Var resid = nn::div(nn::square(nn::sub(y, y_hat)), nn::scale(nn::square(sigma), 2.0));
    Var norm = nn::scale(nn::add_scalar(nn::log(nn::square(sigma)), std::log(2.0 * std::numbers::pi)), 0.5);
    return nn::mean(nn::add(resid, norm));
}

/// NLL with a fixed output standard deviation.
inline Var gaussian_nll(Var y_hat, double sigma, Var y) {
    if (!(sigma > 0.0)) {
        throw InvalidParameter("gaussian_nll: sigma must be > 0");
    }
    Var resid = nn::scale(nn::square(nn::sub(y, y_hat)), 1.0 / (2.0 * sigma * sigma));
    return nn::add_scalar(nn::mean(resid), 0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma));
}

inline Var negative_elbo(Var nll, Var kl, double kl_weight) { return nn::add(nll, nn::scale(kl, kl_weight)); }

} // namespace ilicast::train
