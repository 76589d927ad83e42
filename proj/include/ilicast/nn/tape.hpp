#pragma once

// Reverse-mode differentiation over matrix-valued nodes.
//
// Activations are laid out feature-major: a batch of B vectors of width n is an
// n x B matrix, one sample per column. A Tape is single-threaded; separate
// tapes (and separate models) can be used from separate threads.

#include "ilicast/core/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ilicast::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// A named weight matrix or bias column with its accumulated gradient.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Matrix v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())),
          trainable(train) {}

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
};

class Tape {
public:
    /// Propagates the node's gradient into its parents.
    using Backward = std::function<void(Tape&, std::size_t)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Value that does not need a gradient.
    Var constant(Matrix value) { return push(std::move(value), false, nullptr, {}); }

    /// Leaf whose gradient is kept and can be read with grad().
    Var variable(Matrix value) { return push(std::move(value), true, nullptr, {}); }

    /// Leaf bound to a Parameter; backward() adds into Parameter::grad.
    Var parameter(Parameter& p) { return push(p.value, p.trainable, &p, {}); }

    /// Record the result of a primitive. The node requires a gradient when any
    /// parent does.
    Var record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
        bool needs = false;
        for (const Var& v : parents) {
            needs = needs || nodes_[v.id].requires_grad;
        }
        return push(std::move(value), needs, nullptr, needs ? std::move(backward) : Backward{});
    }

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Gradient of the last backward() target with respect to `v`; zero if `v`
    /// was not reached.
    Matrix grad(Var v) const {
        const Node& n = nodes_[v.id];
        if (n.grad.size() == 0) {
            return Matrix::Zero(n.value.rows(), n.value.cols());
        }
        return n.grad;
    }

    /// Add `g` into the gradient of node `id` (no-op for constants).
    void accumulate(std::size_t id, const Matrix& g) {
        Node& n = nodes_[id];
        if (!n.requires_grad) {
            return;
        }
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

    const Matrix& upstream(std::size_t id) const { return nodes_[id].grad; }

    /// Reverse sweep from a 1x1 loss node. Parameter gradients are accumulated
    /// into their Parameter objects; parameters not reached keep a zero
    /// contribution.
    void backward(Var loss) {
        if (loss.tape != this) {
            throw InvalidInput("backward: loss belongs to another tape");
        }
        if (nodes_[loss.id].value.size() != 1) {
            throw ShapeError("backward: loss must be a 1x1 node");
        }
        for (Node& n : nodes_) {
            n.grad.resize(0, 0);
        }
        if (!nodes_[loss.id].requires_grad) {
            return;
        }
        nodes_[loss.id].grad = Matrix::Ones(1, 1);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.grad.size() == 0) {
                continue;
            }
            if (n.backward) {
                n.backward(*this, i);
            }
            if (n.param != nullptr) {
                if (n.param->grad.size() == 0) {
                    n.param->zero_grad();
                }
                n.param->grad += nodes_[i].grad;
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        Parameter* param = nullptr;
        Backward backward;
    };

    Var push(Matrix value, bool requires_grad, Parameter* param, Backward backward) {
        nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, param, std::move(backward)});
        return Var{this, nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

// ---------------------------------------------------------------------------
// Primitives

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    }
}

inline double softplus_stable(double z) {
    // softplus(z) = max(z, 0) + log1p(exp(-|z|))
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace detail

inline Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " differ");
    }
    Matrix out = a.value() * b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        if (t.requires_grad(a.id)) {
            t.accumulate(a.id, g * t.value(b.id).transpose());
        }
        if (t.requires_grad(b.id)) {
            t.accumulate(b.id, t.value(a.id).transpose() * g);
        }
    });
}

inline Var add(Var a, Var b) {
    detail::require_same_shape(a, b, "add");
    return a.tape->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
        t.accumulate(a.id, t.upstream(self));
        t.accumulate(b.id, t.upstream(self));
    });
}

inline Var sub(Var a, Var b) {
    detail::require_same_shape(a, b, "sub");
    return a.tape->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
        t.accumulate(a.id, t.upstream(self));
        t.accumulate(b.id, -t.upstream(self));
    });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
    detail::require_same_shape(a, b, "mul");
    Matrix out = a.value().cwiseProduct(b.value());
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        if (t.requires_grad(a.id)) {
            t.accumulate(a.id, g.cwiseProduct(t.value(b.id)));
        }
        if (t.requires_grad(b.id)) {
            t.accumulate(b.id, g.cwiseProduct(t.value(a.id)));
        }
    });
}

/// Elementwise quotient.
inline Var div(Var a, Var b) {
    detail::require_same_shape(a, b, "div");
    Matrix out = a.value().cwiseQuotient(b.value());
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        const Matrix& bv = t.value(b.id);
        if (t.requires_grad(a.id)) {
            t.accumulate(a.id, g.cwiseQuotient(bv));
        }
        if (t.requires_grad(b.id)) {
            t.accumulate(b.id, -g.cwiseProduct(t.value(a.id)).cwiseQuotient(bv.cwiseProduct(bv)));
        }
    });
}

/// Adds the column vector `bias` (n x 1) to every column of `a` (n x B).
inline Var add_bias(Var a, Var bias) {
    if (bias.cols() != 1 || bias.rows() != a.rows()) {
        throw ShapeError("add_bias: bias must be " + std::to_string(a.rows()) + "x1");
    }
    Matrix out = a.value().colwise() + bias.value().col(0);
    return a.tape->record(std::move(out), {a, bias}, [a, bias](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        t.accumulate(a.id, g);
        if (t.requires_grad(bias.id)) {
            t.accumulate(bias.id, g.rowwise().sum());
        }
    });
}

inline Var scale(Var a, double k) {
    return a.tape->record(a.value() * k, {a},
                          [a, k](Tape& t, std::size_t self) { t.accumulate(a.id, t.upstream(self) * k); });
}

inline Var add_scalar(Var a, double k) {
    Matrix out = a.value().array() + k;
    return a.tape->record(std::move(out), {a},
                          [a](Tape& t, std::size_t self) { t.accumulate(a.id, t.upstream(self)); });
}

/// max(0, x); the subgradient at 0 is 0.
inline Var relu(Var a) {
    Matrix out = a.value().cwiseMax(0.0);
    return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        Matrix mask = (t.value(a.id).array() > 0.0).cast<double>().matrix();
        t.accumulate(a.id, t.upstream(self).cwiseProduct(mask));
    });
}

inline Var sigmoid(Var a) {
    Matrix out = a.value().unaryExpr([](double z) { return detail::sigmoid(z); });
    const std::size_t out_id = a.tape->size();
    return a.tape->record(std::move(out), {a}, [a, out_id](Tape& t, std::size_t self) {
        const Matrix& s = t.value(out_id);
        t.accumulate(a.id, t.upstream(self).cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
    });
}

inline Var tanh(Var a) {
    Matrix out = a.value().array().tanh();
    const std::size_t out_id = a.tape->size();
    return a.tape->record(std::move(out), {a}, [a, out_id](Tape& t, std::size_t self) {
        const Matrix& y = t.value(out_id);
        t.accumulate(a.id, t.upstream(self).cwiseProduct((1.0 - y.array().square()).matrix()));
    });
}

inline Var exp(Var a) {
    Matrix out = a.value().array().exp();
    const std::size_t out_id = a.tape->size();
    return a.tape->record(std::move(out), {a}, [a, out_id](Tape& t, std::size_t self) {
        t.accumulate(a.id, t.upstream(self).cwiseProduct(t.value(out_id)));
    });
}

inline Var log(Var a) {
    if ((a.value().array() <= 0.0).any()) {
        throw InvalidInput("log: non-positive argument");
    }
    Matrix out = a.value().array().log();
    return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        t.accumulate(a.id, t.upstream(self).cwiseQuotient(t.value(a.id)));
    });
}

inline Var square(Var a) {
    Matrix out = a.value().array().square();
    return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        t.accumulate(a.id, 2.0 * t.upstream(self).cwiseProduct(t.value(a.id)));
    });
}

/// (1/rho) * ln(1 + exp(rho * a)), elementwise.
inline Var softplus(Var a, double rho) {
    if (!(rho > 0.0)) {
        throw InvalidParameter("softplus: sharpening factor must be positive");
    }
    Matrix out = a.value().unaryExpr([rho](double z) { return detail::softplus_stable(rho * z) / rho; });
    return a.tape->record(std::move(out), {a}, [a, rho](Tape& t, std::size_t self) {
        Matrix d = t.value(a.id).unaryExpr([rho](double z) { return detail::sigmoid(rho * z); });
        t.accumulate(a.id, t.upstream(self).cwiseProduct(d));
    });
}

/// Sum of all entries, as a 1x1 node.
inline Var sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        const double g = t.upstream(self)(0, 0);
        t.accumulate(a.id, Matrix::Constant(t.value(a.id).rows(), t.value(a.id).cols(), g));
    });
}

inline Var mean(Var a) {
    if (a.value().size() == 0) {
        throw InvalidInput("mean: empty operand");
    }
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

/// Rows [start, start + count) of `a`.
inline Var slice_rows(Var a, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw ShapeError("slice_rows: range out of bounds");
    }
    Matrix out = a.value().middleRows(start, count);
    return a.tape->record(std::move(out), {a}, [a, start, count](Tape& t, std::size_t self) {
        Matrix g = Matrix::Zero(t.value(a.id).rows(), t.value(a.id).cols());
        g.middleRows(start, count) = t.upstream(self);
        t.accumulate(a.id, g);
    });
}

/// Per-column linear map with column-specific weights.
///
/// Column j of `weights` holds a flattened (out x n) matrix W_j in row-major
/// order followed by an out-vector bias b_j; column j of the result is
/// W_j * h_j + b_j. `weights` has (n + 1) * out rows and B columns, `h` is n x B.
inline Var per_sample_linear(Var weights, Var h, Index out) {
    const Index n = h.rows();
    const Index batch = h.cols();
    if (weights.cols() != batch || weights.rows() != (n + 1) * out) {
        throw ShapeError("per_sample_linear: weights must be " + std::to_string((n + 1) * out) + "x" +
                         std::to_string(batch));
    }
    const Matrix& w = weights.value();
    const Matrix& hv = h.value();
    Matrix y(out, batch);
    for (Index j = 0; j < batch; ++j) {
        for (Index k = 0; k < out; ++k) {
            y(k, j) = w.col(j).segment(k * n, n).dot(hv.col(j)) + w(out * n + k, j);
        }
    }
    return weights.tape->record(std::move(y), {weights, h}, [weights, h, n, out](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        const Matrix& wv = t.value(weights.id);
        const Matrix& hv2 = t.value(h.id);
        const Index cols = g.cols();
        if (t.requires_grad(weights.id)) {
            Matrix gw(wv.rows(), cols);
            for (Index j = 0; j < cols; ++j) {
                for (Index k = 0; k < out; ++k) {
                    gw.col(j).segment(k * n, n) = g(k, j) * hv2.col(j);
                    gw(out * n + k, j) = g(k, j);
                }
            }
            t.accumulate(weights.id, gw);
        }
        if (t.requires_grad(h.id)) {
            Matrix gh = Matrix::Zero(n, cols);
            for (Index j = 0; j < cols; ++j) {
                for (Index k = 0; k < out; ++k) {
                    gh.col(j) += g(k, j) * wv.col(j).segment(k * n, n);
                }
            }
            t.accumulate(h.id, gh);
        }
    });
}

} // namespace ilicast::nn
