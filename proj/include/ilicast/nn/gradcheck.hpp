#pragma once

#include "ilicast/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace ilicast::nn {

/// Relative discrepancy |a - b| / max(|a|, |b|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

/// Scalar-valued function of a set of parameters, rebuilt on a fresh tape on
/// every call.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients of `loss` with central finite differences
/// (step `epsilon`) for every entry of every parameter in `params`. Returns the
/// maximum relative error. `floor` bounds the denominator from below; exact
/// zero gradients of a loss of size L show up as rounding noise of about
/// L * 1e-16 / epsilon, so large losses need a proportionally larger floor.
inline double gradient_check(const LossBuilder& loss, const std::vector<Parameter*>& params,
                             double epsilon = 1e-5, double floor = 1e-6) {
    for (Parameter* p : params) {
        p->zero_grad();
    }
    {
        Tape tape;
        Var l = loss(tape);
        tape.backward(l);
    }
    auto evaluate = [&]() {
        Tape tape;
        return loss(tape).scalar();
    };
    double worst = 0.0;
    for (Parameter* p : params) {
        const Matrix analytic = p->grad;
        for (Index k = 0; k < p->value.size(); ++k) {
            double& entry = p->value.data()[k];
            const double saved = entry;
            entry = saved + epsilon;
            const double up = evaluate();
            entry = saved - epsilon;
            const double down = evaluate();
            entry = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            worst = std::max(worst, relative_error(analytic.data()[k], numeric, floor));
        }
    }
    return worst;
}

/// Point form: `f` receives one leaf per entry of `point`.
inline double gradient_check(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                             const std::vector<Matrix>& point, double epsilon = 1e-5, double floor = 1e-6) {
    std::vector<Parameter> holders;
    holders.reserve(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        holders.emplace_back("x" + std::to_string(i), point[i]);
    }
    std::vector<Parameter*> ptrs;
    for (Parameter& h : holders) {
        ptrs.push_back(&h);
    }
    return gradient_check(
        [&](Tape& tape) {
            std::vector<Var> leaves;
            for (Parameter& h : holders) {
                leaves.push_back(tape.parameter(h));
            }
            return f(tape, leaves);
        },
        ptrs, epsilon, floor);
}

} // namespace ilicast::nn
