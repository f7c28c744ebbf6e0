#pragma once

#include <span>
#include <string_view>

#include "protovae/numgrad/graph.hpp"

namespace protovae::numgrad {

// Differentiable operations. Binary elementwise ops broadcast in the matrix
// view: each dimension of an input must equal the output's or be 1.

Var matmul(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var sigmoid(const Var& x);
Var softplus(const Var& x);
Var relu(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);  // DomainError on any entry <= 0
Var square(const Var& x);
Var negate(const Var& x);

Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double offset);
/// Values outside [lo, hi] are pinned to the bound and pass no gradient.
Var clamp(const Var& x, double lo, double hi);

Var sum(const Var& x);
Var mean(const Var& x);
/// Per-row sum: [n x K] -> [n].
Var sum_rows(const Var& x);
/// Per-row log(sum(exp(row))) with max subtraction: [n x K] -> [n].
Var log_sum_exp(const Var& rows);

Var reshape(const Var& x, Shape shape);

/// x * w + b with b broadcast over rows.
Var linear(const Var& x, const Var& w, const Var& b);

enum class ElementwiseOp { add, mul, sigmoid, softplus, exp, log, square, negate };

/// Tag-dispatched entry point over the elementwise vocabulary. Unary ops take
/// one input, binary ops two.
Var elementwise(ElementwiseOp op, std::span<const Var> inputs);

// Forward-only helpers shared by ops and by callers that do not need graphs.

/// c = a * b for 2-D tensors through the active kernel table.
Tensor matmul_values(const Tensor& a, const Tensor& b);
/// Per-row log-sum-exp of a plain tensor.
Tensor log_sum_exp_values(const Tensor& rows);
/// Numerically stable scalar helpers.
double stable_sigmoid(double x);
double stable_softplus(double x);

}  // namespace protovae::numgrad
