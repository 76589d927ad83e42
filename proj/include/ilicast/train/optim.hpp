#pragma once

#include "ilicast/nn/tape.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace ilicast::train {

using nn::Matrix;
using nn::Parameter;

/// Bias-corrected ADAM.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
        for (Parameter* p : params_) {
            m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }

    /// One update with learning rate `lr` from the gradients stored on the
    /// parameters. Frozen parameters are skipped.
    void step(double lr) {
        for (Parameter* p : params_) {
            if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
                throw ShapeError("adam: gradient of '" + p->name + "' has the wrong shape");
            }
            if (!p->grad.allFinite()) {
                throw TrainingDiverged("adam: non-finite gradient for parameter '" + p->name + "' at step " +
                                       std::to_string(t_ + 1));
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Parameter& p = *params_[i];
            if (!p.trainable) {
                continue;
            }
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
            p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + epsilon_);
        }
    }

    long steps() const { return t_; }
    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    double beta1_;
    double beta2_;
    double epsilon_;
    long t_ = 0;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
    double sq = 0.0;
    for (const Parameter* p : params) {
        sq += p->grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double k = max_norm / norm;
        for (Parameter* p : params) {
            p->grad *= k;
        }
    }
    return norm;
}

// ---------------------------------------------------------------------------

enum class ScheduleKind { exponential, cosine_warmup };

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::exponential;
    double base_rate = 0.01;
    double decay = 0.98;   // exponential
    int warmup_epochs = 10; // cosine_warmup
    double min_rate = 1e-5; // cosine_warmup
    int total_epochs = 200;

    static ScheduleSpec exponential(double base = 0.01, double decay = 0.98, int total = 200) {
        return {ScheduleKind::exponential, base, decay, 0, 0.0, total};
    }
    static ScheduleSpec cosine_warmup(double base = 0.005, int warmup = 10, double min_rate = 1e-5, int total = 200) {
        return {ScheduleKind::cosine_warmup, base, 0.0, warmup, min_rate, total};
    }

    void validate() const {
        if (!(base_rate > 0.0) || total_epochs <= 0) {
            throw InvalidParameter("schedule: base rate and total epochs must be positive");
        }
        if (kind == ScheduleKind::exponential && !(decay > 0.0)) {
            throw InvalidParameter("schedule: decay must be positive");
        }
        if (kind == ScheduleKind::cosine_warmup &&
            (!(min_rate > 0.0) || min_rate > base_rate || warmup_epochs < 0 || warmup_epochs >= total_epochs)) {
            throw InvalidParameter("schedule: need 0 < min_rate <= base and warmup < total epochs");
        }
    }
};

/// Learning rate for a zero-based epoch.
///
/// Cosine warm-up ramps linearly to the base rate over the warm-up epochs
/// (reaching it on the last warm-up epoch), then follows a half cosine from
/// the base rate down to `min_rate` on the final epoch.
inline double lr_at(const ScheduleSpec& s, int epoch) {
    s.validate();
    if (epoch < 0 || epoch >= s.total_epochs) {
        throw InvalidInput("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                           std::to_string(s.total_epochs) + ")");
    }
    if (s.kind == ScheduleKind::exponential) {
        return s.base_rate * std::pow(s.decay, static_cast<double>(epoch));
    }
    if (epoch < s.warmup_epochs) {
        return s.base_rate * static_cast<double>(epoch + 1) / static_cast<double>(s.warmup_epochs);
    }
    const int span = s.total_epochs - s.warmup_epochs - 1;
    const double progress = span > 0 ? static_cast<double>(epoch - s.warmup_epochs) / span : 0.0;
    return s.min_rate + (s.base_rate - s.min_rate) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace ilicast::train
