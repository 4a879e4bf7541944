#pragma once

#include <cstddef>
#include <span>

#include "casd/tape.hpp"

// Differentiable primitives. Every op records its node on the tape of its
// inputs; all inputs must share one tape.
namespace casd {

Var matmul(Var a, Var b);  // [m×k]·[k×n]
Var transpose(Var a);      // [m×n] → [n×m]
Var reshape(Var a, Shape shape);

// Element-wise binary ops. Operands must have identical shapes, or one of
// them must hold a single element (broadcast scalar).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// x [m×n] (or [n]) plus bias [n] on every row.
Var add_bias(Var x, Var bias);

Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
// log(1+exp(x)) via max(x,0)+log1p(exp(-|x|)).
Var softplus(Var a);
Var clamp_min(Var a, double floor);

// Minimum over single-element inputs; the gradient goes to the first argmin.
Var minimum(std::span<const Var> scalars);

Var sum(Var a);
Var mean(Var a);

// [T×d] → [d], mean over the time axis.
Var mean_pool(Var x);

// Temporal convolution with kernel length 3 and zero padding:
// y[t] = b + Σ_{k∈{-1,0,1}} x[t+k]·w[k+1]; x [T×d_in], w [3×d_in×d_out], b [d_out].
Var conv1d_same(Var x, Var w, Var b);

// Stable softmax of x/temperature along the last axis (row-wise for matrices).
Var softmax(Var x, double temperature = 1.0);
Var log_softmax(Var x);

// Single element of a vector as a scalar node.
Var pick(Var x, std::size_t index);

// Σ p·log(p/q) with 0·log 0 = 0 and q floored at 1e-12.
Var kl_div(Var p, Var q);

// Same value, no gradient flow.
Var stop_gradient(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }
inline Var operator+(double c, Var a) { return add_scalar(a, c); }
inline Var operator-(Var a, double c) { return add_scalar(a, -c); }
inline Var operator-(double c, Var a) { return add_scalar(neg(a), c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }

namespace tensor_ops {
// Plain-value softmax of x/temperature over a 1-D tensor.
Tensor softmax(const Tensor& x, double temperature = 1.0);
double softplus(double x);
}  // namespace tensor_ops

}  // namespace casd
