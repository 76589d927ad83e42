#pragma once

#include "ilicast/nn/tape.hpp"

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace ilicast::nn {

enum class Activation { linear, relu };

/// (1/rho) * ln(1 + exp(rho * a)). Evaluated as z + softplus(-z) for large z.
inline double softplus_sharpened(double a, double rho) {
    if (!(rho > 0.0)) {
        throw InvalidParameter("softplus_sharpened: rho must be > 0");
    }
    return detail::softplus_stable(rho * a) / rho;
}

/// Uniform(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
template <typename Rng>
Matrix glorot_uniform(Index rows, Index cols, Index fan_in, Index fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            m(r, c) = dist(rng);
        }
    }
    return m;
}

/// Matrix of independent N(0, 1) draws, filled column by column.
template <typename Rng>
Matrix standard_normal(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            m(r, c) = normal(rng);
        }
    }
    return m;
}

inline Var apply(Var x, Activation act) {
    return act == Activation::relu ? relu(x) : x;
}

// ---------------------------------------------------------------------------

/// Fully connected layer y = act(W x + b).
class Dense {
public:
    Dense() = default;
    Dense(std::string name, Index in, Index out, Activation act = Activation::linear)
        : weight_(name + ".weight", Matrix::Zero(out, in)), bias_(name + ".bias", Matrix::Zero(out, 1)),
          activation_(act) {}

    template <typename Rng>
    void init_glorot(Rng& rng) {
        weight_.value = glorot_uniform(out_dim(), in_dim(), in_dim(), out_dim(), rng);
        bias_.value.setZero();
    }

    Var forward(Tape& tape, Var x) {
        if (x.rows() != in_dim()) {
            throw ShapeError("Dense '" + weight_.name + "': expected input of size " + std::to_string(in_dim()) +
                             ", got " + std::to_string(x.rows()));
        }
        Var pre = add_bias(matmul(tape.parameter(weight_), x), tape.parameter(bias_));
        return apply(pre, activation_);
    }

    Index in_dim() const { return weight_.value.cols(); }
    Index out_dim() const { return weight_.value.rows(); }
    Activation activation() const { return activation_; }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }
    const Parameter& weight() const { return weight_; }
    const Parameter& bias() const { return bias_; }

    std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }

private:
    Parameter weight_;
    Parameter bias_;
    Activation activation_ = Activation::linear;
};

/// act(W x + b) for a single input vector, recorded on `tape`.
inline Vector dense_forward(Tape& tape, Dense& layer, const Vector& x) {
    Var out = layer.forward(tape, tape.constant(x));
    return out.value().col(0);
}

// ---------------------------------------------------------------------------

/// LSTM weights; gate blocks are stacked as [input; forget; candidate; output].
struct LstmParams {
    Parameter input_weight;     // 4H x d
    Parameter recurrent_weight; // 4H x H
    Parameter bias;             // 4H x 1

    LstmParams() = default;
    LstmParams(const std::string& name, Index input_dim, Index hidden)
        : input_weight(name + ".input_weight", Matrix::Zero(4 * hidden, input_dim)),
          recurrent_weight(name + ".recurrent_weight", Matrix::Zero(4 * hidden, hidden)),
          bias(name + ".bias", Matrix::Zero(4 * hidden, 1)) {}

    Index hidden() const { return recurrent_weight.value.cols(); }
    Index input_dim() const { return input_weight.value.cols(); }
};

struct LstmState {
    Matrix h;
    Matrix c;
};

namespace detail {

struct LstmGates {
    Matrix i, f, g, o;
};

/// Elementwise logistic function through exp, which Eigen vectorizes.
template <typename Derived>
Matrix logistic(const Eigen::MatrixBase<Derived>& z) {
    return (1.0 + (-z.array()).exp()).inverse().matrix();
}

/// tanh(z) = 2 logistic(2z) - 1.
template <typename Derived>
Matrix fast_tanh(const Eigen::MatrixBase<Derived>& z) {
    return (2.0 * (1.0 + (-2.0 * z.array()).exp()).inverse() - 1.0).matrix();
}

inline LstmGates activate(const Matrix& z, Index hidden) {
    return LstmGates{logistic(z.topRows(hidden)), logistic(z.middleRows(hidden, hidden)),
                     fast_tanh(z.middleRows(2 * hidden, hidden)), logistic(z.bottomRows(hidden))};
}

inline LstmGates lstm_gates(const LstmParams& p, const Matrix& x, const Matrix& h_prev) {
    Matrix z = p.input_weight.value * x;
    z.noalias() += p.recurrent_weight.value * h_prev;
    z.colwise() += p.bias.value.col(0);
    return activate(z, p.hidden());
}

} // namespace detail

/// One LSTM update for a batch (columns). Pure function of its inputs.
inline LstmState lstm_step(const LstmParams& p, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev) {
    const Index hidden = p.hidden();
    if (x.rows() != p.input_dim() || h_prev.rows() != hidden || c_prev.rows() != hidden ||
        h_prev.cols() != x.cols() || c_prev.cols() != x.cols()) {
        throw ShapeError("lstm_step: inconsistent dimensions");
    }
    const auto gates = detail::lstm_gates(p, x, h_prev);
    LstmState next;
    next.c = gates.f.cwiseProduct(c_prev) + gates.i.cwiseProduct(gates.g);
    next.h = gates.o.cwiseProduct(detail::fast_tanh(next.c));
    return next;
}

/// Runs the cell over `steps` (each d x B) from a zero state and returns the
/// final hidden state (H x B). Recorded on the tape as a single node with a
/// hand-written backpropagation-through-time rule.
inline Var lstm_sequence(Tape& tape, LstmParams& p, const std::vector<Matrix>& steps) {
    if (steps.empty()) {
        throw InvalidInput("lstm_sequence: empty sequence");
    }
    const Index hidden = p.hidden();
    const Index batch = steps.front().cols();
    const Index input = p.input_dim();
    const auto n_steps = static_cast<Index>(steps.size());
    for (const Matrix& x : steps) {
        if (x.rows() != input || x.cols() != batch) {
            throw ShapeError("lstm_sequence: step has shape " + std::to_string(x.rows()) + "x" +
                             std::to_string(x.cols()) + ", expected " + std::to_string(input) + "x" +
                             std::to_string(batch));
        }
    }

    // Step t occupies columns [t*B, (t+1)*B) of the stacked matrices; h and c
    // carry one extra leading block for the zero initial state.
    struct Cache {
        Matrix x;     // d x T*B
        Matrix gates; // 4H x T*B, activated [i; f; g; o]
        Matrix c;     // H x (T+1)*B
        Matrix h;     // H x (T+1)*B
        Matrix tc;    // H x T*B, tanh of the new cell state
    };
    auto cache = std::make_shared<Cache>();
    cache->x.resize(input, n_steps * batch);
    for (Index t = 0; t < n_steps; ++t) {
        cache->x.middleCols(t * batch, batch) = steps[static_cast<std::size_t>(t)];
    }
    Matrix z_all = p.input_weight.value * cache->x;
    z_all.colwise() += p.bias.value.col(0);
    cache->gates.resize(4 * hidden, n_steps * batch);
    cache->c.resize(hidden, (n_steps + 1) * batch);
    cache->h.resize(hidden, (n_steps + 1) * batch);
    cache->c.leftCols(batch).setZero();
    cache->h.leftCols(batch).setZero();
    cache->tc.resize(hidden, n_steps * batch);
    Matrix z(4 * hidden, batch);
    for (Index t = 0; t < n_steps; ++t) {
        z = z_all.middleCols(t * batch, batch);
        z.noalias() += p.recurrent_weight.value * cache->h.middleCols(t * batch, batch);
        // One exp pass for all gates: tanh(z) = 2 logistic(2z) - 1 on the g block.
        z.middleRows(2 * hidden, hidden) *= 2.0;
        auto g = cache->gates.middleCols(t * batch, batch);
        g = detail::logistic(z);
        g.middleRows(2 * hidden, hidden).array() = 2.0 * g.middleRows(2 * hidden, hidden).array() - 1.0;
        auto c_new = cache->c.middleCols((t + 1) * batch, batch);
        c_new = g.middleRows(hidden, hidden).cwiseProduct(cache->c.middleCols(t * batch, batch)) +
                g.topRows(hidden).cwiseProduct(g.middleRows(2 * hidden, hidden));
        auto tc = cache->tc.middleCols(t * batch, batch);
        tc = detail::fast_tanh(c_new);
        cache->h.middleCols((t + 1) * batch, batch) = g.bottomRows(hidden).cwiseProduct(tc);
    }

    Var wx = tape.parameter(p.input_weight);
    Var wh = tape.parameter(p.recurrent_weight);
    Var b = tape.parameter(p.bias);
    Matrix h_last = cache->h.rightCols(batch);
    return tape.record(std::move(h_last), {wx, wh, b}, [cache, wx, wh, b, hidden, n_steps](Tape& t, std::size_t self) {
        const Index bs = t.upstream(self).cols();
        const Matrix& whv = t.value(wh.id);
        Matrix dz_all(4 * hidden, n_steps * bs);
        Matrix dh = t.upstream(self);
        Matrix dc = Matrix::Zero(hidden, bs);
        for (Index step = n_steps; step-- > 0;) {
            const auto gt = cache->gates.middleCols(step * bs, bs);
            const auto gi = gt.topRows(hidden).array();
            const auto gf = gt.middleRows(hidden, hidden).array();
            const auto gg = gt.middleRows(2 * hidden, hidden).array();
            const auto go = gt.bottomRows(hidden).array();
            const auto c_prev = cache->c.middleCols(step * bs, bs).array();
            const auto tc = cache->tc.middleCols(step * bs, bs).array();
            dc.array() += dh.array() * go * (1.0 - tc.square());
            auto dz = dz_all.middleCols(step * bs, bs);
            dz.topRows(hidden) = (dc.array() * gg * gi * (1.0 - gi)).matrix();
            dz.middleRows(hidden, hidden) = (dc.array() * c_prev * gf * (1.0 - gf)).matrix();
            dz.middleRows(2 * hidden, hidden) = (dc.array() * gi * (1.0 - gg.square())).matrix();
            dz.bottomRows(hidden) = (dh.array() * tc * go * (1.0 - go)).matrix();
            dh.noalias() = whv.transpose() * dz;
            dc.array() *= gf;
        }
        t.accumulate(wx.id, dz_all * cache->x.transpose());
        t.accumulate(wh.id, dz_all * cache->h.leftCols(n_steps * bs).transpose());
        t.accumulate(b.id, dz_all.rowwise().sum());
    });
}

/// LSTM layer with Glorot weights, zero bias and forget-gate bias +1.
class Lstm {
public:
    Lstm() = default;
    Lstm(const std::string& name, Index input_dim, Index hidden) : params_(name, input_dim, hidden) {}

    template <typename Rng>
    void init_glorot(Rng& rng) {
        const Index h = params_.hidden();
        const Index d = params_.input_dim();
        params_.input_weight.value = glorot_uniform(4 * h, d, d, 4 * h, rng);
        params_.recurrent_weight.value = glorot_uniform(4 * h, h, h, 4 * h, rng);
        params_.bias.value.setZero();
        params_.bias.value.middleRows(h, h).setOnes();
    }

    Var forward(Tape& tape, const std::vector<Matrix>& steps) { return lstm_sequence(tape, params_, steps); }

    LstmParams& params() { return params_; }
    const LstmParams& params() const { return params_; }
    Index hidden() const { return params_.hidden(); }
    Index input_dim() const { return params_.input_dim(); }

    std::vector<Parameter*> parameters() {
        return {&params_.input_weight, &params_.recurrent_weight, &params_.bias};
    }

private:
    LstmParams params_;
};

// ---------------------------------------------------------------------------

enum class BatchNormMode { train, infer };

/// Per-feature batch normalization over the columns of its input.
class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(const std::string& name, Index features, double momentum = 0.99, double epsilon = 1e-3)
        : gamma_(name + ".gamma", Matrix::Ones(features, 1)), beta_(name + ".beta", Matrix::Zero(features, 1)),
          running_mean_(Vector::Zero(features)), running_var_(Vector::Ones(features)), momentum_(momentum),
          epsilon_(epsilon) {
        if (!(epsilon >= 0.0) || !(momentum >= 0.0 && momentum <= 1.0)) {
            throw InvalidParameter("BatchNorm: momentum must be in [0,1] and epsilon >= 0");
        }
    }

    /// Train mode normalizes with the batch mean and population variance and
    /// updates the running statistics; infer mode uses the running statistics.
    Var forward(Tape& tape, Var x, BatchNormMode mode) {
        const Index n = features();
        if (x.rows() != n) {
            throw ShapeError("BatchNorm: expected " + std::to_string(n) + " features, got " +
                             std::to_string(x.rows()));
        }
        Var gamma = tape.parameter(gamma_);
        Var beta = tape.parameter(beta_);
        const Matrix& xv = x.value();
        const Index batch = xv.cols();
        Vector mu;
        Vector var;
        if (mode == BatchNormMode::train) {
            if (batch < 2) {
                throw InvalidInput("BatchNorm: degenerate batch of size " + std::to_string(batch) +
                                   " in train mode");
            }
            mu = xv.rowwise().mean();
            var = (xv.colwise() - mu).array().square().rowwise().mean();
            running_mean_ = momentum_ * running_mean_ + (1.0 - momentum_) * mu;
            running_var_ = momentum_ * running_var_ + (1.0 - momentum_) * var;
        } else {
            mu = running_mean_;
            var = running_var_;
        }
        const Vector inv_std = (var.array() + epsilon_).rsqrt();
        Matrix xhat = (xv.colwise() - mu).array().colwise() * inv_std.array();
        Matrix y = (xhat.array().colwise() * gamma.value().col(0).array()).colwise() + beta.value().col(0).array();
        const bool batch_stats = mode == BatchNormMode::train;
        return tape.record(std::move(y), {x, gamma, beta},
                           [x, gamma, beta, xhat, inv_std, batch_stats](Tape& t, std::size_t self) {
                               const Matrix& dy = t.upstream(self);
                               if (t.requires_grad(gamma.id)) {
                                   t.accumulate(gamma.id, dy.cwiseProduct(xhat).rowwise().sum());
                               }
                               if (t.requires_grad(beta.id)) {
                                   t.accumulate(beta.id, dy.rowwise().sum());
                               }
                               if (!t.requires_grad(x.id)) {
                                   return;
                               }
                               const Matrix dxhat = dy.array().colwise() * t.value(gamma.id).col(0).array();
                               if (!batch_stats) {
                                   t.accumulate(x.id, dxhat.array().colwise() * inv_std.array());
                                   return;
                               }
                               const double b = static_cast<double>(dy.cols());
                               const Vector sum_d = dxhat.rowwise().sum();
                               const Vector sum_dx = dxhat.cwiseProduct(xhat).rowwise().sum();
                               Matrix dx = ((dxhat * b).colwise() - sum_d).array() -
                                           xhat.array().colwise() * sum_dx.array();
                               dx = dx.array().colwise() * (inv_std.array() / b);
                               t.accumulate(x.id, dx);
                           });
    }

    Index features() const { return gamma_.value.rows(); }
    double momentum() const { return momentum_; }
    double epsilon() const { return epsilon_; }

    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }
    Vector& running_mean() { return running_mean_; }
    Vector& running_var() { return running_var_; }
    const Vector& running_mean() const { return running_mean_; }
    const Vector& running_var() const { return running_var_; }

    std::vector<Parameter*> parameters() { return {&gamma_, &beta_}; }

private:
    Parameter gamma_;
    Parameter beta_;
    Vector running_mean_;
    Vector running_var_;
    double momentum_ = 0.99;
    double epsilon_ = 1e-3;
};

} // namespace ilicast::nn
