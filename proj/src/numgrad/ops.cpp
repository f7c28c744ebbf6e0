#include "protovae/numgrad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "protovae/error.hpp"
#include "protovae/numgrad/kernels.hpp"

namespace protovae::numgrad {

namespace {

struct Broadcast {
    std::size_t rows, cols;
    std::size_t a_rows, a_cols, b_rows, b_cols;
    Shape shape;
    bool same;
};

Broadcast broadcast(const Tensor& a, const Tensor& b, const char* op) {
    Broadcast bc{};
    bc.a_rows = a.rows();
    bc.a_cols = a.cols();
    bc.b_rows = b.rows();
    bc.b_cols = b.cols();
    bc.same = a.shape() == b.shape();
    bc.rows = std::max(bc.a_rows, bc.b_rows);
    bc.cols = std::max(bc.a_cols, bc.b_cols);
    auto ok = [](std::size_t d, std::size_t out) { return d == out || d == 1; };
    if (!ok(bc.a_rows, bc.rows) || !ok(bc.b_rows, bc.rows) || !ok(bc.a_cols, bc.cols) || !ok(bc.b_cols, bc.cols)) {
        throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " do not broadcast");
    }
    if (bc.same) {
        bc.shape = a.shape();
    } else if (bc.a_rows == bc.rows && bc.a_cols == bc.cols) {
        bc.shape = a.shape();
    } else if (bc.b_rows == bc.rows && bc.b_cols == bc.cols) {
        bc.shape = b.shape();
    } else {
        bc.shape = {bc.rows, bc.cols};
    }
    return bc;
}

inline std::size_t at(std::size_t r, std::size_t c, std::size_t rows, std::size_t cols) {
    return (rows == 1 ? 0 : r) * cols + (cols == 1 ? 0 : c);
}

// Sum an output-shaped gradient into a (possibly broadcast) input gradient.
void reduce_into(const Tensor& g, const Broadcast& bc, bool first, Tensor& target) {
    const std::size_t r_in = first ? bc.a_rows : bc.b_rows;
    const std::size_t c_in = first ? bc.a_cols : bc.b_cols;
    if (r_in == bc.rows && c_in == bc.cols) {
        kernels().axpy(g.size(), 1.0, g.data(), target.data());
        return;
    }
    for (std::size_t i = 0; i < bc.rows; ++i)
        for (std::size_t j = 0; j < bc.cols; ++j) target[at(i, j, r_in, c_in)] += g[i * bc.cols + j];
}

template <class Forward, class Backward>
Var unary(const Var& x, const char* op, Forward f, Backward dfdx) {
    const Tensor& in = x.value();
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return make_node(std::move(out), {x},
                     [dfdx](DiffNode& self) {
                         DiffNode& p = *self.parents[0];
                         if (!p.requires_grad) return;
                         for (std::size_t i = 0; i < self.value.size(); ++i)
                             p.grad[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
                     },
                     op);
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + " expects a 2-D tensor, got " + shape_string(t.shape()));
}

}  // namespace

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
    }
    Tensor c({a.rows(), b.cols()});
    kernels().gemm(a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data(), false);
    return c;
}

Tensor log_sum_exp_values(const Tensor& rows) {
    const std::size_t n = rows.rows(), k = rows.cols();
    if (rows.empty() || k == 0) throw ShapeError("log_sum_exp: empty row");
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = rows.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - m);
        out[i] = m + std::log(s);
    }
    return out;
}

Var matmul(const Var& a, const Var& b) {
    Tensor c = matmul_values(a.value(), b.value());
    return make_node(std::move(c), {a, b},
                     [](DiffNode& self) {
                         DiffNode& pa = *self.parents[0];
                         DiffNode& pb = *self.parents[1];
                         const std::size_t m = pa.value.rows(), k = pa.value.cols(), n = pb.value.cols();
                         const auto& kt = kernels();
                         if (pa.requires_grad) {
                             // dA += G * B^T
                             const Tensor bt = pb.value.transposed();
                             kt.gemm(m, k, n, self.grad.data(), bt.data(), pa.grad.data(), true);
                         }
                         if (pb.requires_grad) {
                             // dB += A^T * G
                             const Tensor at_ = pa.value.transposed();
                             kt.gemm(k, n, m, at_.data(), self.grad.data(), pb.grad.data(), true);
                         }
                     },
                     "matmul");
}

Var add(const Var& a, const Var& b) {
    const Broadcast bc = broadcast(a.value(), b.value(), "add");
    Tensor out(bc.shape);
    if (bc.same) {
        kernels().add(out.size(), a.value().data(), b.value().data(), out.data());
    } else {
        for (std::size_t i = 0; i < bc.rows; ++i)
            for (std::size_t j = 0; j < bc.cols; ++j)
                out[i * bc.cols + j] = a.value()[at(i, j, bc.a_rows, bc.a_cols)] +
                                       b.value()[at(i, j, bc.b_rows, bc.b_cols)];
    }
    return make_node(std::move(out), {a, b},
                     [bc](DiffNode& self) {
                         if (self.parents[0]->requires_grad) reduce_into(self.grad, bc, true, self.parents[0]->grad);
                         if (self.parents[1]->requires_grad) reduce_into(self.grad, bc, false, self.parents[1]->grad);
                     },
                     "add");
}

Var sub(const Var& a, const Var& b) {
    return add(a, negate(b));
}

Var mul(const Var& a, const Var& b) {
    const Broadcast bc = broadcast(a.value(), b.value(), "mul");
    Tensor out(bc.shape);
    if (bc.same) {
        kernels().mul(out.size(), a.value().data(), b.value().data(), out.data());
    } else {
        for (std::size_t i = 0; i < bc.rows; ++i)
            for (std::size_t j = 0; j < bc.cols; ++j)
                out[i * bc.cols + j] = a.value()[at(i, j, bc.a_rows, bc.a_cols)] *
                                       b.value()[at(i, j, bc.b_rows, bc.b_cols)];
    }
    return make_node(std::move(out), {a, b},
                     [bc](DiffNode& self) {
                         const Tensor& va = self.parents[0]->value;
                         const Tensor& vb = self.parents[1]->value;
                         for (int side = 0; side < 2; ++side) {
                             DiffNode& p = *self.parents[side];
                             if (!p.requires_grad) continue;
                             const Tensor& other = side == 0 ? vb : va;
                             const std::size_t orows = side == 0 ? bc.b_rows : bc.a_rows;
                             const std::size_t ocols = side == 0 ? bc.b_cols : bc.a_cols;
                             Tensor g(self.grad.shape());
                             if (bc.same) {
                                 kernels().mul(g.size(), self.grad.data(), other.data(), g.data());
                             } else {
                                 for (std::size_t i = 0; i < bc.rows; ++i)
                                     for (std::size_t j = 0; j < bc.cols; ++j)
                                         g[i * bc.cols + j] =
                                             self.grad[i * bc.cols + j] * other[at(i, j, orows, ocols)];
                             }
                             reduce_into(g, bc, side == 0, p.grad);
                         }
                     },
                     "mul");
}

Var sigmoid(const Var& x) {
    return unary(x, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& x) {
    return unary(x, "softplus", stable_softplus, [](double in, double) { return stable_sigmoid(in); });
}

Var relu(const Var& x) {
    return unary(x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var exp(const Var& x) {
    return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(const Var& x) {
    for (double v : x.value().values()) {
        if (!(v > 0.0)) throw DomainError("log of non-positive entry " + std::to_string(v));
    }
    return unary(x, "log", [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Var square(const Var& x) {
    return unary(x, "square", [](double v) { return v * v; }, [](double in, double) { return 2.0 * in; });
}

Var negate(const Var& x) {
    return unary(x, "negate", [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var scale(const Var& x, double factor) {
    return unary(x, "scale", [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Var add_scalar(const Var& x, double offset) {
    return unary(x, "add_scalar", [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Var clamp(const Var& x, double lo, double hi) {
    if (lo > hi) throw ContractError("clamp: lower bound above upper bound");
    return unary(x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
                 [lo, hi](double in, double) { return (in >= lo && in <= hi) ? 1.0 : 0.0; });
}

Var sum(const Var& x) {
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    return make_node(Tensor::scalar(s), {x},
                     [](DiffNode& self) {
                         DiffNode& p = *self.parents[0];
                         const double g = self.grad[0];
                         for (double& v : p.grad.values()) v += g;
                     },
                     "sum");
}

Var mean(const Var& x) {
    if (x.value().empty()) throw ShapeError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var sum_rows(const Var& x) {
    const Tensor& in = x.value();
    const std::size_t n = in.rows(), k = in.cols();
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : in.row(i)) s += v;
        out[i] = s;
    }
    return make_node(std::move(out), {x},
                     [n, k](DiffNode& self) {
                         DiffNode& p = *self.parents[0];
                         for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < k; ++j) p.grad[i * k + j] += self.grad[i];
                     },
                     "sum_rows");
}

Var log_sum_exp(const Var& rows) {
    Tensor out = log_sum_exp_values(rows.value());
    return make_node(std::move(out), {rows},
                     [](DiffNode& self) {
                         DiffNode& p = *self.parents[0];
                         const std::size_t n = p.value.rows(), k = p.value.cols();
                         for (std::size_t i = 0; i < n; ++i) {
                             const double g = self.grad[i], lse = self.value[i];
                             for (std::size_t j = 0; j < k; ++j)
                                 p.grad[i * k + j] += g * std::exp(p.value[i * k + j] - lse);
                         }
                     },
                     "log_sum_exp");
}

Var reshape(const Var& x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    return make_node(std::move(out), {x},
                     [](DiffNode& self) {
                         DiffNode& p = *self.parents[0];
                         kernels().axpy(p.grad.size(), 1.0, self.grad.data(), p.grad.data());
                     },
                     "reshape");
}

Var linear(const Var& x, const Var& w, const Var& b) {
    return add(matmul(x, w), b);
}

Var elementwise(ElementwiseOp op, std::span<const Var> inputs) {
    const bool binary = op == ElementwiseOp::add || op == ElementwiseOp::mul;
    const std::size_t want = binary ? 2 : 1;
    if (inputs.size() != want) {
        throw ContractError("elementwise: expected " + std::to_string(want) + " inputs, got " +
                            std::to_string(inputs.size()));
    }
    switch (op) {
        case ElementwiseOp::add: return add(inputs[0], inputs[1]);
        case ElementwiseOp::mul: return mul(inputs[0], inputs[1]);
        case ElementwiseOp::sigmoid: return sigmoid(inputs[0]);
        case ElementwiseOp::softplus: return softplus(inputs[0]);
        case ElementwiseOp::exp: return exp(inputs[0]);
        case ElementwiseOp::log: return log(inputs[0]);
        case ElementwiseOp::square: return square(inputs[0]);
        case ElementwiseOp::negate: return negate(inputs[0]);
    }
    throw ContractError("elementwise: unknown op");
}

}  // namespace protovae::numgrad
