#include <catch_amalgamated.hpp>

#include "ilicast/nn/gradcheck.hpp"
#include "ilicast/nn/layers.hpp"
#include "ilicast/train/losses.hpp"
#include "ilicast/train/optim.hpp"
#include "ilicast/train/trainer.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace ilicast;
using namespace ilicast::train;
using nn::Matrix;
using nn::Parameter;
using nn::Tape;
using Catch::Approx;

namespace {

struct Pairs {
    std::vector<double> x;
    std::vector<double> y;
};

/// y_hat = w x + b trained with MSE.
struct LinearModel {
    Parameter w{"w", Matrix::Zero(1, 1)};
    Parameter b{"b", Matrix::Zero(1, 1)};

    std::vector<Parameter*> parameters() { return {&w, &b}; }

    Var training_loss(Tape& tape, const Pairs& data, std::span<const std::size_t> idx, TrainContext&) {
        Matrix x(1, static_cast<Eigen::Index>(idx.size()));
        Matrix y(1, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            x(0, static_cast<Eigen::Index>(j)) = data.x[idx[j]];
            y(0, static_cast<Eigen::Index>(j)) = data.y[idx[j]];
        }
        Var pred = nn::add_bias(nn::matmul(tape.parameter(w), tape.constant(x)), tape.parameter(b));
        return mse(pred, tape.constant(y));
    }
};

Pairs doubling_data(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Pairs d;
    for (std::size_t i = 0; i < n; ++i) {
        d.x.push_back(u(rng));
        d.y.push_back(2.0 * d.x.back());
    }
    return d;
}

} // namespace

TEST_CASE("mse loss examples", "[train][loss]") {
    const std::vector<double> y{1.0, 3.0};
    CHECK(mse_loss(y, y) == 0.0);
    CHECK(mse_loss(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
    CHECK(mse_loss(y, std::vector<double>{2, 2}) == 1.0);
    CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}), InvalidInput);
}

TEST_CASE("gaussian nll examples", "[train][loss]") {
    const std::vector<double> y{0.5, -1.0};
    const double s0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    CHECK(std::abs(gaussian_nll(y, y, std::vector<double>{s0, s0})) < 1e-15);
    CHECK(gaussian_nll(y, y, std::vector<double>{1.0, 1.0}) == Approx(0.5 * std::log(2.0 * std::numbers::pi)));
    CHECK(gaussian_nll(y, y, std::vector<double>{1.0, 1.0}) == Approx(0.91894).margin(1e-5));
    const double confident = gaussian_nll(std::vector<double>{1.0}, std::vector<double>{0.0}, std::vector<double>{1e-3});
    CHECK(confident == Approx(5e5 + std::log(1e-3) + 0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(confident == Approx(499994.0).margin(0.5));
    CHECK_THROWS_AS(gaussian_nll(y, y, std::vector<double>{1.0, 0.0}), InvalidParameter);
    CHECK_THROWS_AS(gaussian_nll(y, y, std::vector<double>{1.0, -1.0}), InvalidParameter);
}

TEST_CASE("gaussian nll decomposes for constant sigma", "[train][loss][property]") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 3.0);
    std::uniform_real_distribution<double> s(0.1, 5.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> y(7);
        std::vector<double> p(7);
        for (std::size_t t = 0; t < y.size(); ++t) {
            y[t] = n(rng);
            p[t] = n(rng);
        }
        const double sigma = s(rng);
        const std::vector<double> sig(7, sigma);
        const double expected =
            mse_loss(y, p) / (2.0 * sigma * sigma) + 0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma);
        CHECK(std::abs(gaussian_nll(y, p, sig) - expected) < 1e-12);
    }
}

TEST_CASE("negative elbo examples", "[train][loss]") {
    bayes::GaussianWeightDistribution q{nn::Vector::Constant(1, 0.0), nn::Vector::Constant(1, 1.0)};
    bayes::GaussianWeightDistribution p{nn::Vector::Constant(1, 1.0), nn::Vector::Constant(1, 1.0)};
    const std::vector<double> y{2.0, 3.0};
    const double s0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    CHECK(std::abs(negative_elbo(y, y, std::vector<double>{s0, s0}, q, q)) < 1e-15);
    CHECK(negative_elbo(y, y, std::vector<double>{1.0, 1.0}, q, p) == Approx(1.41894).margin(1e-5));
    const double kl_a = negative_elbo(y, y, std::vector<double>{1.0, 1.0}, q, p) - gaussian_nll(y, y, std::vector<double>{1.0, 1.0});
    const std::vector<double> other{-4.0, 9.0};
    const double kl_b = negative_elbo(other, y, std::vector<double>{1.0, 1.0}, q, p) -
                        gaussian_nll(other, y, std::vector<double>{1.0, 1.0});
    CHECK(kl_a == Approx(kl_b).epsilon(1e-12));
}

TEST_CASE("negative elbo approaches nll as q approaches p", "[train][loss][property]") {
    const std::vector<double> y{1.0, 2.0};
    const std::vector<double> p_hat{1.5, 1.0};
    const std::vector<double> sig{0.7, 0.7};
    bayes::GaussianWeightDistribution prior{nn::Vector::Constant(3, 0.2), nn::Vector::Constant(3, 0.5)};
    double previous = INFINITY;
    for (double gap : {1.0, 0.1, 0.01, 1e-3, 1e-4}) {
        bayes::GaussianWeightDistribution q{prior.mean.array() + gap, prior.std.array() * (1.0 + gap)};
        const double excess = negative_elbo(y, p_hat, sig, q, prior) - gaussian_nll(y, p_hat, sig);
        CHECK(excess >= 0.0);
        CHECK(excess < previous);
        previous = excess;
    }
    CHECK(previous < 1e-6);
}

TEST_CASE("tape losses match scalar forms and gradients", "[train][loss][gradcheck]") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix y(1, 5);
        Matrix p(1, 5);
        Matrix raw(1, 5);
        for (int j = 0; j < 5; ++j) {
            y(0, j) = n(rng);
            p(0, j) = n(rng);
            raw(0, j) = n(rng);
        }
        {
            Tape t;
            const double v = gaussian_nll(t.constant(p), nn::softplus(t.constant(raw), 0.25), t.constant(y)).scalar();
            std::vector<double> sig(5);
            for (int j = 0; j < 5; ++j) {
                sig[static_cast<std::size_t>(j)] = nn::softplus_sharpened(raw(0, j), 0.25);
            }
            std::vector<double> yv(y.data(), y.data() + 5);
            std::vector<double> pv(p.data(), p.data() + 5);
            CHECK(v == Approx(gaussian_nll(yv, pv, sig)).epsilon(1e-12));
            Tape t2;
            CHECK(mse(t2.constant(p), t2.constant(y)).scalar() == Approx(mse_loss(yv, pv)).epsilon(1e-12));
        }
        const double err_nll = nn::gradient_check(
            [&](Tape& t, const std::vector<Var>& v) {
                return gaussian_nll(v[0], nn::softplus(v[1], 0.25), t.constant(y));
            },
            {p, raw});
        CHECK(err_nll < 1e-4);
        const double err_fixed = nn::gradient_check(
            [&](Tape& t, const std::vector<Var>& v) { return gaussian_nll(v[0], 5.0, t.constant(y)); }, {p});
        CHECK(err_fixed < 1e-4);
        const double err_mse =
            nn::gradient_check([&](Tape& t, const std::vector<Var>& v) { return mse(v[0], t.constant(y)); }, {p});
        CHECK(err_mse < 1e-4);
    }
}

TEST_CASE("adam examples", "[train][adam]") {
    Parameter w("w", Matrix::Constant(2, 1, 1.5));
    Adam adam({&w});
    w.grad.setZero();
    adam.step(0.1);
    CHECK(w.value.isApprox(Matrix::Constant(2, 1, 1.5)));

    Parameter v("v", Matrix::Zero(1, 1));
    Adam a2({&v});
    v.grad(0, 0) = 3.7;
    a2.step(0.01);
    CHECK(v.value(0, 0) == Approx(-0.01).epsilon(1e-6));
    const double first = v.value(0, 0);
    a2.step(0.01);
    const double second = v.value(0, 0) - first;
    CHECK(std::abs(second) < 0.01);
    CHECK(a2.steps() == 2);

    Parameter bad("bad", Matrix::Zero(1, 1));
    Adam a3({&bad});
    bad.grad(0, 0) = NAN;
    CHECK_THROWS_AS(a3.step(0.01), TrainingDiverged);
}

TEST_CASE("adam first step ignores gradient scale", "[train][adam][property]") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix g(3, 2);
        for (Eigen::Index k = 0; k < g.size(); ++k) {
            g.data()[k] = n(rng);
        }
        Parameter a("a", Matrix::Zero(3, 2));
        Parameter b("b", Matrix::Zero(3, 2));
        Adam oa({&a});
        Adam ob({&b});
        a.grad = g;
        b.grad = 2.0 * g;
        oa.step(0.01);
        ob.step(0.01);
        CHECK((a.value.array().sign() == b.value.array().sign()).all());
        CHECK((a.value.array().sign() == -g.array().sign()).all());
    }
}

TEST_CASE("frozen parameters are not updated", "[train][adam]") {
    Parameter w("w", Matrix::Ones(1, 1), false);
    Adam adam({&w});
    w.grad(0, 0) = 1.0;
    adam.step(0.1);
    CHECK(w.value(0, 0) == 1.0);
}

TEST_CASE("gradient clipping", "[train][clip]") {
    Parameter a("a", Matrix::Zero(1, 2));
    Parameter b("b", Matrix::Zero(1, 1));
    a.grad << 3.0, 0.0;
    b.grad << 4.0;
    CHECK(clip_global_norm({&a, &b}, 1.0) == Approx(5.0));
    CHECK(a.grad(0, 0) == Approx(0.6));
    CHECK(b.grad(0, 0) == Approx(0.8));
    CHECK(clip_global_norm({&a, &b}, 10.0) == Approx(1.0));
    CHECK(a.grad(0, 0) == Approx(0.6));
}

TEST_CASE("learning rate schedules", "[train][schedule]") {
    const auto exp = ScheduleSpec::exponential(0.01, 0.98, 200);
    CHECK(lr_at(exp, 0) == 0.01);
    CHECK(lr_at(exp, 2) == Approx(0.009604).epsilon(1e-12));
    CHECK_THROWS_AS(lr_at(exp, 200), InvalidInput);
    CHECK_THROWS_AS(lr_at(exp, -1), InvalidInput);

    const auto cos = ScheduleSpec::cosine_warmup(0.005, 10, 1e-5, 200);
    CHECK(lr_at(cos, 9) == 0.005);
    CHECK(lr_at(cos, 10) == Approx(0.005).epsilon(1e-15));
    CHECK(lr_at(cos, 0) == Approx(0.0005));
    CHECK(lr_at(cos, 199) == Approx(1e-5).epsilon(1e-12));
    for (int e = 10; e < 199; ++e) {
        CHECK(lr_at(cos, e + 1) <= lr_at(cos, e));
        CHECK(lr_at(cos, e) > 0.0);
    }
    auto bad = ScheduleSpec::cosine_warmup(0.005, 200, 1e-5, 200);
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    auto neg = ScheduleSpec::exponential(-0.1);
    CHECK_THROWS_AS(neg.validate(), InvalidParameter);
}

TEST_CASE("batches merge a trailing singleton", "[train][batches]") {
    std::vector<std::size_t> order(65);
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    const auto batches = make_batches(order, 32);
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].size() == 32);
    CHECK(batches[1].size() == 33);
    CHECK(batches[1].back() == 64);
    CHECK(make_batches(std::span(order).first(64), 32).size() == 2);
}

TEST_CASE("training a linear model", "[train][loop]") {
    const Pairs data = doubling_data(200, 4);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 32;
    cfg.seed = 9;
    cfg.schedule = ScheduleSpec::exponential(0.05, 0.98, 200);

    LinearModel m;
    const auto result = train::train(m, data, data.x.size(), cfg);
    CHECK(m.w.value(0, 0) == Approx(2.0).margin(1e-3));
    CHECK(result.loss_trace.size() == 200);
    CHECK(result.loss_trace.back() < result.loss_trace.front());

    LinearModel again;
    train::train(again, data, data.x.size(), cfg);
    CHECK(again.w.value == m.w.value);
    CHECK(again.b.value == m.b.value);

    LinearModel untouched;
    untouched.w.value(0, 0) = 0.7;
    TrainConfig none = cfg;
    none.epochs = 0;
    const auto empty = train::train(untouched, data, data.x.size(), none);
    CHECK(untouched.w.value(0, 0) == 0.7);
    CHECK(empty.loss_trace.empty());
}

TEST_CASE("training aborts on a non-finite loss", "[train][loop]") {
    Pairs data = doubling_data(40, 5);
    data.y[3] = NAN;
    TrainConfig cfg;
    cfg.epochs = 2;
    LinearModel m;
    CHECK_THROWS_AS(train::train(m, data, data.x.size(), cfg), TrainingDiverged);
}
