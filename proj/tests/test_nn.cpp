#include <catch_amalgamated.hpp>

#include "ilicast/nn/gradcheck.hpp"
#include "ilicast/nn/layers.hpp"

#include <cmath>
#include <random>

using namespace ilicast;
using namespace ilicast::nn;
using Catch::Approx;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (Index k = 0; k < m.size(); ++k) {
        m.data()[k] = u(rng);
    }
    return m;
}

/// Pushes entries at least `gap` away from zero so relu kinks are avoided.
Matrix away_from_zero(Matrix m, double gap = 1e-3) {
    for (Index k = 0; k < m.size(); ++k) {
        double& v = m.data()[k];
        if (std::abs(v) < gap) {
            v = v < 0 ? -gap - std::abs(v) : gap + std::abs(v);
        }
    }
    return m;
}

} // namespace

TEST_CASE("dense forward examples", "[nn][dense]") {
    Tape tape;
    Dense identity("id", 2, 2);
    identity.weight().value = Matrix::Identity(2, 2);
    Vector x(2);
    x << 3, -1;
    const Vector out = dense_forward(tape, identity, x);
    CHECK(out(0) == 3.0);
    CHECK(out(1) == -1.0);

    Dense layer("d", 2, 2);
    layer.weight().value << 1, 2, 3, 4;
    layer.bias().value << 1, 0;
    Vector ones = Vector::Ones(2);
    const Vector y = dense_forward(tape, layer, ones);
    CHECK(y(0) == 4.0);
    CHECK(y(1) == 7.0);

    Dense r("r", 1, 1, Activation::relu);
    r.weight().value(0, 0) = 1.0;
    Vector minus_one = Vector::Constant(1, -1.0);
    CHECK(dense_forward(tape, r, minus_one)(0) == 0.0);
}

TEST_CASE("dense rejects wrong input size", "[nn][dense]") {
    Tape tape;
    Dense layer("d", 3, 2);
    CHECK_THROWS_AS(dense_forward(tape, layer, Vector::Zero(2)), ShapeError);
}

TEST_CASE("lstm step examples", "[nn][lstm]") {
    LstmParams p("l", 1, 1);
    const Matrix zero = Matrix::Zero(1, 1);
    auto s = lstm_step(p, zero, zero, zero);
    CHECK(s.h(0, 0) == 0.0);
    CHECK(s.c(0, 0) == 0.0);

    const Matrix c_prev = Matrix::Constant(1, 1, 2.0);
    s = lstm_step(p, zero, zero, c_prev);
    CHECK(s.c(0, 0) == Approx(1.0).margin(1e-15));
    CHECK(s.h(0, 0) == Approx(0.5 * std::tanh(1.0)).margin(1e-15));
    CHECK(s.h(0, 0) == Approx(0.3808).margin(1e-4));

    std::mt19937_64 rng(3);
    LstmParams q("q", 3, 4);
    q.input_weight.value = random_matrix(16, 3, rng);
    q.recurrent_weight.value = random_matrix(16, 4, rng);
    q.bias.value = random_matrix(16, 1, rng);
    const Matrix x = random_matrix(3, 2, rng);
    const Matrix h = random_matrix(4, 2, rng);
    const Matrix c = random_matrix(4, 2, rng);
    const auto a = lstm_step(q, x, h, c);
    const auto b = lstm_step(q, x, h, c);
    CHECK(a.h == b.h);
    CHECK(a.c == b.c);
}

TEST_CASE("lstm sequence examples", "[nn][lstm]") {
    std::mt19937_64 rng(5);
    LstmParams p("l", 2, 3);
    p.input_weight.value = random_matrix(12, 2, rng);
    p.recurrent_weight.value = random_matrix(12, 3, rng);
    p.bias.value = random_matrix(12, 1, rng);
    const Matrix x = random_matrix(2, 1, rng);

    Tape tape;
    const Matrix seq = lstm_sequence(tape, p, {x}).value();
    const auto step = lstm_step(p, x, Matrix::Zero(3, 1), Matrix::Zero(3, 1));
    CHECK((seq - step.h).cwiseAbs().maxCoeff() == 0.0);

    LstmParams zero("z", 2, 3);
    const Matrix out = lstm_sequence(tape, zero, {random_matrix(2, 1, rng), random_matrix(2, 1, rng)}).value();
    CHECK(out.isZero(0.0));

    CHECK_THROWS_AS(lstm_sequence(tape, p, {}), InvalidInput);
}

TEST_CASE("lstm cell state bound", "[nn][lstm][property]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        LstmParams p("l", 2, 3);
        p.input_weight.value = random_matrix(12, 2, rng, -3, 3);
        p.recurrent_weight.value = random_matrix(12, 3, rng, -3, 3);
        p.bias.value = random_matrix(12, 1, rng, -3, 3);
        const Matrix x = random_matrix(2, 1, rng, -3, 3);
        const Matrix h = random_matrix(3, 1, rng);
        const Matrix c = random_matrix(3, 1, rng, -5, 5);
        const auto gates = detail::lstm_gates(p, x, h);
        const auto s = lstm_step(p, x, h, c);
        for (Index k = 0; k < 3; ++k) {
            CHECK(std::abs(s.c(k, 0)) <= std::abs(gates.f(k, 0) * c(k, 0)) + 1.0 + 1e-12);
        }
    }
}

TEST_CASE("batch norm examples", "[nn][batchnorm]") {
    Tape tape;
    BatchNorm bn("bn", 1, 0.99, 0.0);
    Matrix x(1, 2);
    x << 0, 2;
    Matrix y = bn.forward(tape, tape.constant(x), BatchNormMode::train).value();
    CHECK(y(0, 0) == Approx(-1.0).margin(1e-12));
    CHECK(y(0, 1) == Approx(1.0).margin(1e-12));

    BatchNorm fixed("bn", 1);
    Matrix z(1, 4);
    z << -1, 1, -1, 1; // mean 0, population variance 1
    y = fixed.forward(tape, tape.constant(z), BatchNormMode::train).value();
    for (Index j = 0; j < 4; ++j) {
        CHECK(y(0, j) == Approx(z(0, j) / std::sqrt(1.0 + 1e-3)).margin(1e-12));
        CHECK(std::abs(y(0, j) - z(0, j)) < 1e-3);
    }

    BatchNorm shifted("bn", 1);
    shifted.gamma().value.setZero();
    shifted.beta().value.setConstant(5.0);
    y = shifted.forward(tape, tape.constant(z), BatchNormMode::train).value();
    CHECK((y.array() == 5.0).all());

    BatchNorm degenerate("bn", 1);
    CHECK_THROWS_AS(degenerate.forward(tape, tape.constant(Matrix::Ones(1, 1)), BatchNormMode::train), InvalidInput);
}

TEST_CASE("batch norm running statistics", "[nn][batchnorm]") {
    Tape tape;
    BatchNorm bn("bn", 1);
    Matrix x(1, 2);
    x << 0, 2;
    bn.forward(tape, tape.constant(x), BatchNormMode::train);
    CHECK(bn.running_mean()(0) == Approx(0.99 * 0.0 + 0.01 * 1.0));
    CHECK(bn.running_var()(0) == Approx(0.99 * 1.0 + 0.01 * 1.0));

    bn.running_mean()(0) = 1.0;
    bn.running_var()(0) = 4.0 - 1e-3;
    const Matrix y = bn.forward(tape, tape.constant(Matrix::Constant(1, 1, 3.0)), BatchNormMode::infer).value();
    CHECK(y(0, 0) == Approx(1.0).margin(1e-12));
}

TEST_CASE("batch norm normalizes every batch", "[nn][batchnorm][property]") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        Tape tape;
        BatchNorm bn("bn", 3);
        const Matrix x = random_matrix(3, 8, rng, -10, 10);
        const Matrix y = bn.forward(tape, tape.constant(x), BatchNormMode::train).value();
        const Matrix var = (x.colwise() - x.rowwise().mean()).array().square().rowwise().mean();
        for (Index r = 0; r < 3; ++r) {
            CHECK(std::abs(y.row(r).mean()) < 1e-10);
            const double out_var = (y.row(r).array() - y.row(r).mean()).square().mean();
            CHECK(out_var == Approx(var(r, 0) / (var(r, 0) + 1e-3)).epsilon(1e-12));
            CHECK(std::abs(out_var - 1.0) <= 1e-3 / var(r, 0) + 1e-12);
        }
    }
}

TEST_CASE("softplus sharpened", "[nn][softplus]") {
    CHECK(softplus_sharpened(0.0, 0.25) == Approx(4.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(softplus_sharpened(0.0, 0.25) == Approx(2.77259).margin(1e-5));
    CHECK(softplus_sharpened(0.0, 1.0) == Approx(0.69315).margin(1e-5));
    CHECK(softplus_sharpened(50.0, 1.0) == Approx(50.0).epsilon(1e-15));
    CHECK(std::isfinite(softplus_sharpened(1e6, 1.0)));
    CHECK_THROWS_AS(softplus_sharpened(1.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(softplus_sharpened(1.0, -1.0), InvalidParameter);
}

TEST_CASE("softplus positivity and slope", "[nn][softplus][property]") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> a(-30.0, 30.0);
    std::uniform_real_distribution<double> r(0.05, 20.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double x = a(rng);
        const double rho = r(rng);
        CHECK(softplus_sharpened(x, rho) > 0.0);
        Tape tape;
        Var v = tape.variable(Matrix::Constant(1, 1, x));
        Var s = softplus(v, rho);
        tape.backward(sum(s));
        const double slope = tape.grad(v)(0, 0);
        CHECK(slope == Approx(detail::sigmoid(rho * x)).epsilon(1e-12));
        CHECK(slope >= 0.0);
        CHECK(slope <= 1.0);
    }
}

TEST_CASE("backward examples", "[nn][tape]") {
    {
        Tape tape;
        Var x = tape.variable(Matrix::Constant(1, 1, 3.0));
        tape.backward(sum(square(x)));
        CHECK(tape.grad(x)(0, 0) == Approx(6.0));
    }
    {
        Tape tape;
        Var x = tape.variable(Matrix::Constant(1, 1, 3.0));
        Var c = tape.constant(Matrix::Constant(1, 1, 7.0));
        (void)x;
        tape.backward(sum(c));
        CHECK(tape.grad(x)(0, 0) == 0.0);
    }
    {
        Tape tape;
        Var x = tape.variable(Matrix::Constant(1, 1, 2.0));
        Var y = tape.variable(Matrix::Constant(1, 1, 3.0));
        tape.backward(sum(mul(x, y)));
        CHECK(tape.grad(x)(0, 0) == Approx(3.0));
        CHECK(tape.grad(y)(0, 0) == Approx(2.0));
    }
    {
        Parameter unused("u", Matrix::Constant(2, 2, 1.0));
        Parameter used("w", Matrix::Constant(1, 1, 2.0));
        Tape tape;
        tape.parameter(unused);
        Var w = tape.parameter(used);
        tape.backward(sum(square(w)));
        CHECK(unused.grad.isZero(0.0));
        CHECK(used.grad(0, 0) == Approx(4.0));
    }
}

TEST_CASE("backward requires scalar loss", "[nn][tape]") {
    Tape tape;
    Var x = tape.variable(Matrix::Ones(2, 1));
    CHECK_THROWS(tape.backward(x));
}

TEST_CASE("gradient check examples", "[nn][gradcheck]") {
    std::mt19937_64 rng(23);
    const Matrix a = random_matrix(3, 3, rng);
    const Matrix q = a * a.transpose() + Matrix::Identity(3, 3);
    const double quad = gradient_check(
        [&](Tape& t, const std::vector<Var>& v) {
            Var x = v[0];
            return sum(mul(x, matmul(t.constant(q), x)));
        },
        {random_matrix(3, 1, rng)});
    CHECK(quad < 1e-6);

    const Matrix w = random_matrix(1, 4, rng);
    const double lin = gradient_check(
        [&](Tape& t, const std::vector<Var>& v) { return sum(matmul(t.constant(w), v[0])); },
        {random_matrix(4, 1, rng)});
    CHECK(lin < 1e-9);

    Dense layer("d", 4, 3, Activation::relu);
    layer.init_glorot(rng);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix pre = layer.weight().value * x + layer.bias().value.replicate(1, 5);
    if ((pre.array().abs() > 1e-3).all()) {
        const double err = gradient_check([&](Tape& t) { return sum(square(layer.forward(t, t.constant(x)))); },
                                          layer.parameters());
        CHECK(err < 1e-4);
    }
}

TEST_CASE("primitive gradients", "[nn][gradcheck][property]") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix a = random_matrix(3, 4, rng);
        const Matrix b = random_matrix(3, 4, rng, 0.5, 2.0);
        const Matrix m = random_matrix(4, 2, rng);
        const Matrix bias = random_matrix(3, 1, rng);
        const double err = gradient_check(
            [](Tape&, const std::vector<Var>& v) {
                Var z = add_bias(matmul(v[0], v[2]), v[3]);
                Var e = add(sigmoid(z), tanh(z));
                Var f = div(mul(v[0], v[1]), add_scalar(exp(scale(v[1], -0.5)), 1.0));
                Var g = add(log(v[1]), softplus(sub(v[0], v[1]), 3.0));
                return add(mean(square(e)), add(sum(slice_rows(f, 1, 2)), mean(g)));
            },
            {a, b, m, bias});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("relu gradient away from kinks", "[nn][gradcheck][property]") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const double err = gradient_check(
            [](Tape&, const std::vector<Var>& v) { return sum(square(relu(v[0]))); },
            {away_from_zero(random_matrix(4, 3, rng))});
        CHECK(err < 1e-4);
    }
    Tape tape;
    Var zero = tape.variable(Matrix::Zero(1, 1));
    tape.backward(sum(relu(zero)));
    CHECK(tape.grad(zero)(0, 0) == 0.0);
}

TEST_CASE("per-sample linear gradient", "[nn][gradcheck][property]") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 3;
        const Index out = 2;
        const Index batch = 4;
        const double err = gradient_check(
            [&](Tape&, const std::vector<Var>& v) { return sum(square(per_sample_linear(v[0], v[1], out))); },
            {random_matrix((n + 1) * out, batch, rng), random_matrix(n, batch, rng)});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("layer gradients over random draws", "[nn][gradcheck][property]") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        Dense dense("d", 5, 4, Activation::relu);
        dense.init_glorot(rng);
        dense.bias().value = random_matrix(4, 1, rng, -0.1, 0.1);
        Matrix x = random_matrix(5, 6, rng);
        const Matrix pre = dense.weight().value * x + dense.bias().value.replicate(1, 6);
        if ((pre.array().abs() < 1e-3).any()) {
            continue;
        }
        const double err = gradient_check([&](Tape& t) { return mean(square(dense.forward(t, t.constant(x)))); },
                                          dense.parameters());
        CHECK(err < 1e-4);
    }
    for (int trial = 0; trial < 100; ++trial) {
        Lstm lstm("l", 3, 4);
        lstm.init_glorot(rng);
        lstm.params().bias.value = random_matrix(16, 1, rng);
        std::vector<Matrix> steps;
        for (int t = 0; t < 5; ++t) {
            steps.push_back(random_matrix(3, 2, rng));
        }
        const Matrix target = random_matrix(4, 2, rng);
        const double err = gradient_check(
            [&](Tape& t) { return mean(square(sub(lstm.forward(t, steps), t.constant(target)))); },
            lstm.parameters());
        CHECK(err < 1e-4);
    }
    for (int trial = 0; trial < 100; ++trial) {
        BatchNorm bn("bn", 3);
        bn.gamma().value = random_matrix(3, 1, rng, 0.5, 2.0);
        bn.beta().value = random_matrix(3, 1, rng);
        const Matrix w = random_matrix(3, 5, rng);
        Parameter input("x", random_matrix(3, 5, rng, -3, 3));
        auto params = bn.parameters();
        params.push_back(&input);
        const double err = gradient_check(
            [&](Tape& t) {
                Var y = bn.forward(t, t.parameter(input), BatchNormMode::train);
                return sum(mul(y, t.constant(w)));
            },
            params);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("glorot initialization", "[nn][init]") {
    std::mt19937_64 rng(43);
    Dense d("d", 100, 25, Activation::relu);
    d.init_glorot(rng);
    const double limit = std::sqrt(6.0 / 125.0);
    CHECK(d.weight().value.cwiseAbs().maxCoeff() <= limit);
    CHECK(d.bias().value.isZero(0.0));

    Lstm l("l", 3, 2);
    l.init_glorot(rng);
    const Matrix& b = l.params().bias.value;
    CHECK(b.middleRows(2, 2).isOnes(0.0));
    CHECK(b.topRows(2).isZero(0.0));
    CHECK(b.bottomRows(4).isZero(0.0));
}
