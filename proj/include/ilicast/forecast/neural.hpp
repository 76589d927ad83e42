#pragma once

// Feed-forward and LSTM forecasters with four output heads:
//   v  one linear unit (point forecast, MSE)
//   d  two units, mean and softplus_rho std (Gaussian NLL)
//   m  stochastic one-unit head with amortized weight posterior (negative ELBO,
//      fixed output std sigma)
//   c  stochastic two-unit head (negative ELBO using the predicted std)
//
// FF:   flatten (column-major) -> dense(relu) -> [batch norm] -> head
// LSTM: lstm -> dense(relu) -> [batch norm] -> head

#include "ilicast/bayes/bayes_layer.hpp"
#include "ilicast/data/windows.hpp"
#include "ilicast/forecast/spec.hpp"
#include "ilicast/forecast/uncertainty.hpp"
#include "ilicast/nn/layers.hpp"
#include "ilicast/train/losses.hpp"
#include "ilicast/train/trainer.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace ilicast::forecast {

using nn::Index;
using nn::Matrix;
using nn::Tape;
using nn::Var;

class NeuralForecaster {
public:
    /// `input_rows` is m + 1 (queries plus the ILI row), `lookback` the window
    /// length in days.
    NeuralForecaster(const ForecasterSpec& spec, Index input_rows, Index lookback, std::uint64_t seed = 0)
        : spec_(spec), input_rows_(input_rows), lookback_(lookback) {
        spec_.validate();
        if (!spec_.neural()) {
            throw ConfigurationError("NeuralForecaster: '" + spec_.id() + "' is not a neural model");
        }
        if (input_rows < 1 || lookback < 1) {
            throw ConfigurationError("NeuralForecaster: input dimensions must be positive");
        }
        std::mt19937_64 rng(seed);
        Index width = 0;
        if (spec_.architecture == Architecture::ff) {
            hidden_ = nn::Dense("hidden", input_rows * lookback, spec_.ff_hidden, nn::Activation::relu);
            hidden_->init_glorot(rng);
            width = spec_.ff_hidden;
        } else {
            lstm_ = nn::Lstm("lstm", input_rows, spec_.lstm_hidden);
            lstm_->init_glorot(rng);
            hidden_ = nn::Dense("dense", spec_.lstm_hidden, spec_.lstm_dense, nn::Activation::relu);
            hidden_->init_glorot(rng);
            width = spec_.lstm_dense;
        }
        if (spec_.uses_batch_norm()) {
            norm_ = nn::BatchNorm("batch_norm", width, spec_.bn_momentum, spec_.bn_epsilon);
        }
        switch (spec_.uncertainty) {
        case Uncertainty::v:
            head_ = nn::Dense("head", width, 1);
            head_->init_glorot(rng);
            break;
        case Uncertainty::d:
            head_ = nn::Dense("head", width, 2);
            head_->init_glorot(rng);
            break;
        case Uncertainty::m:
            bayes_ = bayes::AmortizedBayesLayer("bayes", width, 1, spec_.rho_q, spec_.sigma_p);
            bayes_->init_glorot(rng);
            break;
        case Uncertainty::c:
            bayes_ = bayes::AmortizedBayesLayer("bayes", width, 2, spec_.rho_q, spec_.sigma_p);
            bayes_->init_glorot(rng);
            break;
        }
    }

    const ForecasterSpec& spec() const { return spec_; }
    Index input_rows() const { return input_rows_; }
    Index lookback() const { return lookback_; }

    std::vector<nn::Parameter*> parameters() {
        std::vector<nn::Parameter*> out;
        auto append = [&out](std::vector<nn::Parameter*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
        if (lstm_) {
            append(lstm_->parameters());
        }
        append(hidden_->parameters());
        if (norm_) {
            append(norm_->parameters());
        }
        if (head_) {
            append(head_->parameters());
        }
        if (bayes_) {
            append(bayes_->parameters());
        }
        return out;
    }

    Index parameter_count() {
        Index n = 0;
        for (auto* p : parameters()) {
            n += p->size();
        }
        return n;
    }

    nn::BatchNorm* batch_norm() { return norm_ ? &*norm_ : nullptr; }
    bayes::AmortizedBayesLayer* bayes_layer() { return bayes_ ? &*bayes_ : nullptr; }
    nn::Dense* head() { return head_ ? &*head_ : nullptr; }

    /// Penultimate activations (width x B) for the given windows.
    Var representation(Tape& tape, std::span<const data::RealMatrix* const> xs, nn::BatchNormMode mode) {
        if (xs.empty()) {
            throw InvalidInput("NeuralForecaster: empty batch");
        }
        for (const auto* x : xs) {
            if (x->rows() != input_rows_ || x->cols() != lookback_) {
                throw ShapeError("NeuralForecaster: window is " + std::to_string(x->rows()) + "x" +
                                 std::to_string(x->cols()) + ", expected " + std::to_string(input_rows_) + "x" +
                                 std::to_string(lookback_));
            }
        }
        const auto batch = static_cast<Index>(xs.size());
        Var h;
        if (spec_.architecture == Architecture::ff) {
            Matrix flat(input_rows_ * lookback_, batch);
            for (Index j = 0; j < batch; ++j) {
                flat.col(j) = data::flatten_column_major(*xs[static_cast<std::size_t>(j)]);
            }
            h = hidden_->forward(tape, tape.constant(std::move(flat)));
        } else {
            std::vector<Matrix> steps(static_cast<std::size_t>(lookback_), Matrix(input_rows_, batch));
            for (Index t = 0; t < lookback_; ++t) {
                for (Index j = 0; j < batch; ++j) {
                    steps[static_cast<std::size_t>(t)].col(j) = xs[static_cast<std::size_t>(j)]->col(t);
                }
            }
            h = hidden_->forward(tape, lstm_->forward(tape, steps));
        }
        if (norm_) {
            h = norm_->forward(tape, h, mode);
        }
        return h;
    }

    /// Training objective for one minibatch of `data`.
    Var training_loss(Tape& tape, const data::WindowedDataset& data, std::span<const std::size_t> idx,
                      train::TrainContext& ctx) {
        std::vector<const data::RealMatrix*> xs;
        Matrix y(1, static_cast<Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            xs.push_back(&data.samples[idx[j]].x);
            y(0, static_cast<Index>(j)) = data.samples[idx[j]].y;
        }
        return loss_on(tape, xs, y, ctx.rng, ctx.kl_weight);
    }

    /// Loss on explicit windows/targets; `rng` supplies the weight-sample noise.
    template <typename Rng>
    Var loss_on(Tape& tape, std::span<const data::RealMatrix* const> xs, const Matrix& targets, Rng& rng,
                double kl_weight) {
        Var h = representation(tape, xs, nn::BatchNormMode::train);
        Var y = tape.constant(targets);
        switch (spec_.uncertainty) {
        case Uncertainty::v:
            return train::mse(head_->forward(tape, h), y);
        case Uncertainty::d: {
            Var out = head_->forward(tape, h);
            return train::gaussian_nll(nn::slice_rows(out, 0, 1), nn::softplus(nn::slice_rows(out, 1, 1), spec_.rho),
                                       y);
        }
        case Uncertainty::m:
        case Uncertainty::c: {
            Matrix noise = standard_normal(bayes_->weight_count(), h.cols(), rng);
            return bayes_loss(tape, h, y, noise, kl_weight);
        }
        }
        throw MisuseError("unreachable");
    }

    /// Negative ELBO of the stochastic head for fixed noise.
    Var bayes_loss(Tape& tape, Var h, Var y, const Matrix& noise, double kl_weight) {
        auto q = bayes_->posterior(tape, h);
        Var prior_mean = bayes_->prior_mean(tape, h);
        Var phi = bayes::AmortizedBayesLayer::reparameterize(tape, q, noise);
        Var out = bayes_->output(phi, h);
        Var nll = spec_.uncertainty == Uncertainty::m
                      ? train::gaussian_nll(out, spec_.sigma, y)
                      : train::gaussian_nll(nn::slice_rows(out, 0, 1),
                                            nn::softplus(nn::slice_rows(out, 1, 1), spec_.rho), y);
        return train::negative_elbo(nll, bayes_->kl(q, prior_mean), kl_weight);
    }

    // -----------------------------------------------------------------------
    // Prediction (batch norm in inference mode).

    double predict_point(const data::RealMatrix& x) {
        require_mode(Uncertainty::v, "predict_point");
        return predict_batch(one(x), 1, nullptr).mean[0];
    }

    MeanStd predict_data_uncertainty(const data::RealMatrix& x) {
        require_mode(Uncertainty::d, "predict_data_uncertainty");
        auto f = predict_batch(one(x), 1, nullptr);
        return {f.mean[0], (*f.std)[0]};
    }

    template <typename Rng>
    MeanStd predict_model_uncertainty(const data::RealMatrix& x, int k, Rng& rng) {
        require_mode(Uncertainty::m, "predict_model_uncertainty");
        std::mt19937_64 local(rng());
        auto f = predict_batch(one(x), k, &local);
        return {f.mean[0], (*f.std)[0]};
    }

    template <typename Rng>
    MeanStd predict_combined(const data::RealMatrix& x, int k, Rng& rng) {
        require_mode(Uncertainty::c, "predict_combined");
        std::mt19937_64 local(rng());
        auto f = predict_batch(one(x), k, &local);
        return {f.mean[0], (*f.std)[0]};
    }

    /// Raw K-sample output for one window of a stochastic model: sampled means
    /// and (for -c) sampled stds.
    std::pair<std::vector<double>, std::vector<double>> sample_outputs(const data::RealMatrix& x, int k,
                                                                       std::mt19937_64& rng) {
        if (!bayes_) {
            throw MisuseError("sample_outputs: '" + spec_.id() + "' has no stochastic head");
        }
        std::vector<const data::RealMatrix*> xs{&x};
        Tape tape;
        Var h = representation(tape, xs, nn::BatchNormMode::infer);
        auto q = bayes_->posterior(tape, h);
        std::vector<double> means;
        std::vector<double> stds;
        for (int s = 0; s < k; ++s) {
            Matrix noise = standard_normal(bayes_->weight_count(), 1, rng);
            auto [mu, sd] = head_sample(h.value(), q.mean.value(), q.std.value(), noise);
            means.push_back(mu(0, 0));
            stds.push_back(sd.size() > 0 ? sd(0, 0) : 0.0);
        }
        return {means, stds};
    }

    /// Forecast for every window in `xs`. `k` samples (and `rng`) are used by
    /// stochastic heads only.
    ProbabilisticForecast predict_batch(std::span<const data::RealMatrix* const> xs, int k, std::mt19937_64* rng) {
        if (k < 1) {
            throw InvalidParameter("predict: K must be >= 1");
        }
        Tape tape;
        Var h = representation(tape, xs, nn::BatchNormMode::infer);
        const Index n = h.cols();
        ProbabilisticForecast f;
        f.mean.resize(static_cast<std::size_t>(n));
        if (head_) {
            const Matrix out = head_->forward(tape, h).value();
            for (Index j = 0; j < n; ++j) {
                f.mean[static_cast<std::size_t>(j)] = out(0, j);
            }
            if (spec_.uncertainty == Uncertainty::d) {
                std::vector<double> sd(static_cast<std::size_t>(n));
                for (Index j = 0; j < n; ++j) {
                    sd[static_cast<std::size_t>(j)] = nn::softplus_sharpened(out(1, j), spec_.rho);
                }
                f.std = std::move(sd);
            }
            return f;
        }
        if (rng == nullptr) {
            throw InvalidInput("predict: stochastic model needs a random source");
        }
        auto q = bayes_->posterior(tape, h);
        const Matrix& hv = h.value();
        const Matrix& qm = q.mean.value();
        const Matrix& qs = q.std.value();
        Matrix means(k, n);
        Matrix stds = Matrix::Zero(k, n);
        for (int s = 0; s < k; ++s) {
            Matrix noise = standard_normal(bayes_->weight_count(), n, *rng);
            auto [mu, sd] = head_sample(hv, qm, qs, noise);
            means.row(s) = mu.row(0);
            if (sd.size() > 0) {
                stds.row(s) = sd.row(0);
            }
        }
        std::vector<double> sd(static_cast<std::size_t>(n));
        for (Index j = 0; j < n; ++j) {
            std::vector<double> mcol(means.col(j).data(), means.col(j).data() + k);
            std::vector<double> scol(stds.col(j).data(), stds.col(j).data() + k);
            const MeanStd ms = combine_uncertainty(mcol, scol);
            f.mean[static_cast<std::size_t>(j)] = ms.mean;
            sd[static_cast<std::size_t>(j)] = ms.std;
        }
        f.std = std::move(sd);
        return f;
    }

    /// Forecast for all samples of a dataset, with dates and truth attached.
    ProbabilisticForecast predict(const data::WindowedDataset& data, int k, std::uint64_t seed) {
        std::vector<const data::RealMatrix*> xs;
        for (const auto& s : data.samples) {
            xs.push_back(&s.x);
        }
        std::mt19937_64 rng(seed);
        auto f = predict_batch(xs, k, &rng);
        for (const auto& s : data.samples) {
            f.dates.push_back(s.target);
            f.truth.push_back(s.y);
        }
        return f;
    }

    template <typename Rng>
    static Matrix standard_normal(Index rows, Index cols, Rng& rng) {
        return nn::standard_normal(rows, cols, rng);
    }

private:
    static std::vector<const data::RealMatrix*> one(const data::RealMatrix& x) { return {&x}; }

    void require_mode(Uncertainty u, const char* what) const {
        if (spec_.uncertainty != u) {
            throw MisuseError(std::string(what) + " called on '" + spec_.id() + "'");
        }
    }

    /// Head outputs for one draw of weights: (means 1xN, stds 1xN or empty).
    std::pair<Matrix, Matrix> head_sample(const Matrix& h, const Matrix& q_mean, const Matrix& q_std,
                                          const Matrix& noise) const {
        const Index width = h.rows();
        const Index n = h.cols();
        const Index units = bayes_->out_units();
        const Matrix phi = q_mean + q_std.cwiseProduct(noise);
        Matrix out(units, n);
        for (Index j = 0; j < n; ++j) {
            for (Index u = 0; u < units; ++u) {
                out(u, j) = phi.col(j).segment(u * width, width).dot(h.col(j)) + phi(units * width + u, j);
            }
        }
        Matrix mu = out.row(0);
        if (units == 1) {
            return {mu, Matrix()};
        }
        Matrix sd = out.row(1).unaryExpr([this](double a) { return nn::softplus_sharpened(a, spec_.rho); });
        return {mu, sd};
    }

    ForecasterSpec spec_;
    Index input_rows_;
    Index lookback_;
    std::optional<nn::Lstm> lstm_;
    std::optional<nn::Dense> hidden_;
    std::optional<nn::BatchNorm> norm_;
    std::optional<nn::Dense> head_;
    std::optional<bayes::AmortizedBayesLayer> bayes_;
};

/// Trainable parameter count of the model `spec` describes; baselines have none.
inline Index trainable_parameter_count(const ForecasterSpec& spec, Index input_rows, Index lookback) {
    if (!spec.neural()) {
        return 0;
    }
    NeuralForecaster model(spec, input_rows, lookback);
    Index n = 0;
    for (auto* p : model.parameters()) {
        if (p->trainable) {
            n += p->size();
        }
    }
    return n;
}

/// Default training settings per architecture: exponential decay for FF,
/// cosine with warm-up and gradient clipping for LSTM.
inline train::TrainConfig default_train_config(const ForecasterSpec& spec, int epochs = 200, std::uint64_t seed = 0) {
    train::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = seed;
    if (spec.architecture == Architecture::lstm) {
        cfg.schedule = train::ScheduleSpec::cosine_warmup(0.005, std::min(10, epochs / 2), 1e-5, epochs > 0 ? epochs : 1);
        cfg.clip_norm = 5.0;
    } else {
        cfg.schedule = train::ScheduleSpec::exponential(0.01, 0.98, epochs > 0 ? epochs : 1);
    }
    return cfg;
}

} // namespace ilicast::forecast
