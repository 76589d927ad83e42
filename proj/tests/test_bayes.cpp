#include <catch_amalgamated.hpp>

#include "ilicast/bayes/bayes_layer.hpp"
#include "ilicast/nn/gradcheck.hpp"

#include <cmath>
#include <random>

using namespace ilicast;
using namespace ilicast::bayes;
using nn::Matrix;
using nn::Parameter;
using nn::Vector;
using Catch::Approx;

namespace {

GaussianWeightDistribution gaussian(std::initializer_list<double> mean, std::initializer_list<double> std) {
    GaussianWeightDistribution d;
    d.mean = Eigen::Map<const Vector>(mean.begin(), static_cast<Eigen::Index>(mean.size()));
    d.std = Eigen::Map<const Vector>(std.begin(), static_cast<Eigen::Index>(std.size()));
    return d;
}

} // namespace

TEST_CASE("prior parameters", "[bayes][prior]") {
    AmortizedBayesLayer layer("b", 3, 1);
    const auto p = prior_params(layer, Vector::Ones(3));
    CHECK(p.mean.isZero(0.0));
    CHECK(p.size() == 4);
    CHECK((p.std.array() == 0.5).all());

    AmortizedBayesLayer ident("i", 1, 1);
    ident.prior_net().weight().value.setZero();
    ident.prior_net().weight().value(0, 0) = 1.0;
    const auto q = prior_params(ident, Vector::Constant(1, 2.0));
    CHECK(q.mean(0) == 2.0);
    CHECK(q.std(0) == 0.5);

    std::mt19937_64 rng(1);
    layer.init_glorot(rng);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector cond(3);
        cond << n(rng), n(rng), n(rng);
        const auto r = prior_params(layer, cond);
        CHECK((r.std.array() == 0.5).all());
    }
    CHECK_THROWS_AS(prior_params(layer, Vector::Ones(2)), ShapeError);
}

TEST_CASE("posterior parameters", "[bayes][posterior]") {
    AmortizedBayesLayer layer("b", 2, 2);
    const auto q = posterior_params(layer, Vector::Ones(2));
    CHECK(q.size() == 6);
    CHECK(q.mean.isZero(0.0));
    for (Eigen::Index k = 0; k < q.size(); ++k) {
        CHECK(q.std(k) == Approx(std::log(2.0) / 10.0).epsilon(1e-14));
        CHECK(q.std(k) == Approx(0.06931).margin(1e-5));
    }
    std::mt19937_64 rng(2);
    layer.init_glorot(rng);
    std::normal_distribution<double> n(0.0, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
        Vector cond(2);
        cond << n(rng), n(rng);
        CHECK((posterior_params(layer, cond).std.array() > 0.0).all());
    }
    CHECK_THROWS_AS(posterior_params(layer, Vector::Ones(3)), ShapeError);
}

TEST_CASE("weight sampling", "[bayes][sample]") {
    auto d = gaussian({1.0, -2.0}, {0.0, 0.0});
    std::mt19937_64 rng(3);
    const auto s = sample_weights(d, rng);
    CHECK(s.weights == d.mean);

    auto e = gaussian({0.5, 1.5}, {1.0, 2.0});
    std::mt19937_64 a(9);
    std::mt19937_64 b(9);
    const auto sa = sample_weights(e, a);
    const auto sb = sample_weights(e, b);
    CHECK(sa.weights == sb.weights);
    CHECK(sa.weights == e.mean + e.std.cwiseProduct(sa.noise));
}

TEST_CASE("weight sampling moments", "[bayes][sample][property]") {
    auto d = gaussian({0.3, -1.0, 2.0}, {1.0, 1.0, 1.0});
    std::mt19937_64 rng(4);
    const int n = 100000;
    Vector sum = Vector::Zero(3);
    Vector sq = Vector::Zero(3);
    for (int i = 0; i < n; ++i) {
        const auto s = sample_weights(d, rng);
        sum += s.weights;
        sq += s.weights.cwiseProduct(s.weights);
    }
    const Vector mean = sum / n;
    const Vector var = (sq / n - mean.cwiseProduct(mean)) * n / (n - 1.0);
    for (Eigen::Index k = 0; k < 3; ++k) {
        CHECK(std::abs(mean(k) - d.mean(k)) < 4.0 * d.std(k) / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(var(k) - 1.0) < 0.05);
    }
}

TEST_CASE("kl divergence examples", "[bayes][kl]") {
    const auto p = gaussian({0.2, -0.4}, {0.5, 1.5});
    CHECK(kl_gaussian(p, p) == 0.0);
    CHECK(kl_gaussian(gaussian({0.0}, {1.0}), gaussian({1.0}, {1.0})) == Approx(0.5).epsilon(1e-15));
    CHECK(kl_gaussian(gaussian({0.0}, {0.5}), gaussian({0.0}, {1.0})) ==
          Approx(std::log(2.0) + 0.125 - 0.5).epsilon(1e-14));
    CHECK(kl_gaussian(gaussian({0.0}, {0.5}), gaussian({0.0}, {1.0})) == Approx(0.31815).margin(1e-5));
    CHECK_THROWS_AS(kl_gaussian(gaussian({0.0}, {0.0}), gaussian({0.0}, {1.0})), InvalidParameter);
    CHECK_THROWS_AS(kl_gaussian(gaussian({0.0}, {1.0}), gaussian({0.0}, {-1.0})), InvalidParameter);
    CHECK_THROWS_AS(kl_gaussian(gaussian({0.0, 1.0}, {1.0, 1.0}), gaussian({0.0}, {1.0})), ShapeError);
}

TEST_CASE("kl divergence is nonnegative", "[bayes][kl][property]") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> m(0.0, 2.0);
    std::uniform_real_distribution<double> s(0.05, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        GaussianWeightDistribution q{Vector(4), Vector(4)};
        GaussianWeightDistribution p{Vector(4), Vector(4)};
        for (int k = 0; k < 4; ++k) {
            q.mean(k) = m(rng);
            q.std(k) = s(rng);
            p.mean(k) = m(rng);
            p.std(k) = s(rng);
        }
        CHECK(kl_gaussian(q, p) > 0.0);
        CHECK(std::abs(kl_gaussian(q, q)) < 1e-12);
    }
}

TEST_CASE("tape kl matches closed form", "[bayes][kl]") {
    std::mt19937_64 rng(6);
    AmortizedBayesLayer layer("b", 3, 2);
    layer.init_glorot(rng);
    Matrix cond = Matrix::Random(3, 4);
    nn::Tape tape;
    Var c = tape.constant(cond);
    auto q = layer.posterior(tape, c);
    Var pm = layer.prior_mean(tape, c);
    const double batch_kl = layer.kl(q, pm).scalar();
    double expected = 0.0;
    for (Eigen::Index j = 0; j < 4; ++j) {
        const auto qd = posterior_params(layer, cond.col(j));
        const auto pd = prior_params(layer, cond.col(j));
        expected += kl_gaussian(qd, pd) / 4.0;
    }
    CHECK(batch_kl == Approx(expected).epsilon(1e-12));
}

TEST_CASE("reparameterized sample gradients", "[bayes][gradcheck][property]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix noise = nn::standard_normal(6, 3, rng);
        const Matrix target = Matrix::Random(2, 3);
        const Matrix cond = Matrix::Random(2, 3);
        const double err = nn::gradient_check(
            [&](nn::Tape& t, const std::vector<Var>& v) {
                DistributionVars q{v[0], nn::softplus(v[1], 10.0)};
                Var phi = AmortizedBayesLayer::reparameterize(t, q, noise);
                Var out = nn::per_sample_linear(phi, t.constant(cond), 2);
                return nn::mean(nn::square(nn::sub(out, t.constant(target))));
            },
            {Matrix::Random(6, 3), Matrix::Random(6, 3)});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("amortized layer gradients", "[bayes][gradcheck][property]") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        AmortizedBayesLayer layer("b", 3, 2);
        layer.init_glorot(rng);
        const Matrix cond = Matrix::Random(3, 4);
        const Matrix noise = nn::standard_normal(layer.weight_count(), 4, rng);
        const Matrix y = Matrix::Random(1, 4);
        const double err = nn::gradient_check(
            [&](nn::Tape& t) {
                Var c = t.constant(cond);
                auto q = layer.posterior(t, c);
                Var phi = AmortizedBayesLayer::reparameterize(t, q, noise);
                Var out = layer.output(phi, c);
                Var resid = nn::sub(nn::slice_rows(out, 0, 1), t.constant(y));
                return nn::add(nn::mean(nn::square(resid)), nn::scale(layer.kl(q, layer.prior_mean(t, c)), 0.1));
            },
            layer.parameters());
        CHECK(err < 1e-4);
    }
}

TEST_CASE("layer rejects bad hyperparameters", "[bayes]") {
    CHECK_THROWS_AS(AmortizedBayesLayer("b", 3, 1, 0.0, 0.5), InvalidParameter);
    CHECK_THROWS_AS(AmortizedBayesLayer("b", 3, 1, 10.0, -0.5), InvalidParameter);
}
