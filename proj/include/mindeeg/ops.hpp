// Differentiable primitives. Every function records its adjoint on the current
// tape when at least one input requires grad.
//
// Axis conventions: rank-1 tensors behave as a 1×n row, so axis 0 of a
// vector is its only axis. Elementwise binary ops broadcast rank-2 operands
// along any axis of extent 1 (bias rows, gating columns).
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mindeeg/tensor.hpp"

namespace mindeeg {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor elu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
// x^(-1/2) for x > 0; exactly 0 (with zero adjoint) where x <= 0.
Tensor rsqrt_or_zero(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);

// Full reduction to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Reduction along an axis, keeping it with extent 1.
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor max(const Tensor& x, std::size_t axis);
Tensor squared_norm(const Tensor& x);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
// Contiguous run of `length` rows (axis 0) or columns (axis 1).
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
// Rows of a rank-2 table; repeated indices scatter their adjoints additively.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

// Forward: the quantized values. Backward: the adjoint goes to `input`
// unchanged, and nothing reaches `quantized` through this node.
Tensor straight_through(const Tensor& input, const Tensor& quantized);
Tensor stop_gradient(const Tensor& x);

// Softmax cross-entropy of a logit row against a class id.
Tensor cross_entropy(const Tensor& logits, std::size_t label);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace mindeeg
