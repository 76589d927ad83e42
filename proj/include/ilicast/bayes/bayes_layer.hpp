#pragma once

// Variational output layer with amortized Gaussian prior and posterior over
// the final layer's weights and biases.
//
// Both distributions are produced per input by single dense layers reading a
// conditioning vector (the network's penultimate activations):
//   prior      N(f_prior(h), sigma_p)            fixed, shared std
//   posterior  N(mu_q(h), softplus_rho_q(s(h)))  [mu_q; s] = f_post(h)
// A weight sample phi = mu_q + sigma_q * eps then maps h to the head outputs.

#include "ilicast/nn/layers.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ilicast::bayes {

using nn::Index;
using nn::Matrix;
using nn::Tape;
using nn::Var;
using nn::Vector;

struct GaussianWeightDistribution {
    Vector mean;
    Vector std;

    Index size() const { return mean.size(); }
};

struct WeightSample {
    Vector weights;
    Vector noise;
};

/// Distribution parameters for a batch, one column per input.
struct DistributionVars {
    Var mean;
    Var std;
};

class AmortizedBayesLayer {
public:
    AmortizedBayesLayer() = default;

    /// `cond_dim` is the width of the conditioning vector, which is also the
    /// input width of the stochastic head; `out_units` is 1 or 2.
    AmortizedBayesLayer(const std::string& name, Index cond_dim, Index out_units, double rho_q = 10.0,
                        double sigma_p = 0.5)
        : cond_dim_(cond_dim), out_units_(out_units), rho_q_(rho_q), sigma_p_(sigma_p),
          prior_net_(name + ".prior", cond_dim, (cond_dim + 1) * out_units),
          posterior_net_(name + ".posterior", cond_dim, 2 * (cond_dim + 1) * out_units) {
        if (!(rho_q > 0.0)) {
            throw InvalidParameter("AmortizedBayesLayer: rho_q must be > 0");
        }
        if (!(sigma_p > 0.0)) {
            throw InvalidParameter("AmortizedBayesLayer: sigma_p must be > 0");
        }
        if (out_units < 1 || cond_dim < 1) {
            throw ConfigurationError("AmortizedBayesLayer: dimensions must be positive");
        }
    }

    template <typename Rng>
    void init_glorot(Rng& rng) {
        prior_net_.init_glorot(rng);
        posterior_net_.init_glorot(rng);
    }

    /// Number of stochastic weights (head weights plus biases).
    Index weight_count() const { return (cond_dim_ + 1) * out_units_; }
    Index cond_dim() const { return cond_dim_; }
    Index out_units() const { return out_units_; }
    double rho_q() const { return rho_q_; }
    double sigma_p() const { return sigma_p_; }

    /// Prior mean (weight_count x B); the std is the constant sigma_p.
    Var prior_mean(Tape& tape, Var cond) { return prior_net_.forward(tape, cond); }

    DistributionVars posterior(Tape& tape, Var cond) {
        Var raw = posterior_net_.forward(tape, cond);
        const Index n = weight_count();
        return DistributionVars{nn::slice_rows(raw, 0, n), nn::softplus(nn::slice_rows(raw, n, n), rho_q_)};
    }

    /// mean + std * noise; gradients flow into mean and std.
    static Var reparameterize(Tape& tape, const DistributionVars& q, const Matrix& noise) {
        if (noise.rows() != q.mean.rows() || noise.cols() != q.mean.cols()) {
            throw ShapeError("reparameterize: noise shape does not match the distribution");
        }
        return nn::add(q.mean, nn::mul(q.std, tape.constant(noise)));
    }

    /// Batch mean of the per-input KL(q || p) summed over weights, as 1x1.
    Var kl(const DistributionVars& q, Var prior_mean) const {
        const double inv_two_var = 1.0 / (2.0 * sigma_p_ * sigma_p_);
        // ln(sigma_p) - ln(sigma_q) + (sigma_q^2 + (mu_q - mu_p)^2) / (2 sigma_p^2) - 1/2
        Var spread = nn::scale(nn::add(nn::square(q.std), nn::square(nn::sub(q.mean, prior_mean))), inv_two_var);
        Var terms = nn::add_scalar(nn::sub(spread, nn::log(q.std)), std::log(sigma_p_) - 0.5);
        return nn::scale(nn::sum(terms), 1.0 / static_cast<double>(terms.cols()));
    }

    /// Head outputs (out_units x B) for sampled weights.
    Var output(Var weights, Var cond) const { return nn::per_sample_linear(weights, cond, out_units_); }

    nn::Dense& prior_net() { return prior_net_; }
    nn::Dense& posterior_net() { return posterior_net_; }
    const nn::Dense& prior_net() const { return prior_net_; }
    const nn::Dense& posterior_net() const { return posterior_net_; }

    std::vector<nn::Parameter*> parameters() {
        return {&prior_net_.weight(), &prior_net_.bias(), &posterior_net_.weight(), &posterior_net_.bias()};
    }

private:
    Index cond_dim_ = 0;
    Index out_units_ = 1;
    double rho_q_ = 10.0;
    double sigma_p_ = 0.5;
    nn::Dense prior_net_;
    nn::Dense posterior_net_;
};

// ---------------------------------------------------------------------------
// Single-input forms.

inline GaussianWeightDistribution prior_params(AmortizedBayesLayer& layer, const Vector& cond) {
    if (cond.size() != layer.cond_dim()) {
        throw ShapeError("prior_params: conditioning vector has size " + std::to_string(cond.size()) +
                         ", expected " + std::to_string(layer.cond_dim()));
    }
    Tape tape;
    Var mean = layer.prior_mean(tape, tape.constant(cond));
    return {mean.value().col(0), Vector::Constant(layer.weight_count(), layer.sigma_p())};
}

inline GaussianWeightDistribution posterior_params(AmortizedBayesLayer& layer, const Vector& cond) {
    if (cond.size() != layer.cond_dim()) {
        throw ShapeError("posterior_params: conditioning vector has size " + std::to_string(cond.size()) +
                         ", expected " + std::to_string(layer.cond_dim()));
    }
    Tape tape;
    auto q = layer.posterior(tape, tape.constant(cond));
    return {q.mean.value().col(0), q.std.value().col(0)};
}

template <typename Rng>
WeightSample sample_weights(const GaussianWeightDistribution& dist, Rng& rng) {
    if (dist.mean.size() != dist.std.size()) {
        throw ShapeError("sample_weights: mean and std sizes differ");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    WeightSample s;
    s.noise.resize(dist.size());
    for (Index k = 0; k < dist.size(); ++k) {
        s.noise[k] = normal(rng);
    }
    s.weights = dist.mean + dist.std.cwiseProduct(s.noise);
    return s;
}

/// Closed-form KL(q || p) between diagonal Gaussians.
inline double kl_gaussian(const GaussianWeightDistribution& q, const GaussianWeightDistribution& p) {
    if (q.size() != p.size() || q.std.size() != q.size() || p.std.size() != p.size()) {
        throw ShapeError("kl_gaussian: dimension mismatch");
    }
    double total = 0.0;
    for (Index k = 0; k < q.size(); ++k) {
        const double sq = q.std[k];
        const double sp = p.std[k];
        if (!(sq > 0.0) || !(sp > 0.0)) {
            throw InvalidParameter("kl_gaussian: standard deviations must be positive");
        }
        const double dm = q.mean[k] - p.mean[k];
        total += std::log(sp / sq) + (sq * sq + dm * dm) / (2.0 * sp * sp) - 0.5;
    }
    return total;
}

} // namespace ilicast::bayes
