#pragma once

// Differentiable tensor operations.
//
// Field tensors are batch-first and channels-last: [B, n_1, ..., n_d, C],
// so the spatial dimension count is rank - 2.

#include <string>
#include <vector>

#include "opforge/tensor.hpp"

namespace opforge {

enum class Activation { Identity, Tanh, Relu, Gelu, LeakyRelu };

// Accepts tanh, relu, gelu, leaky_relu (and identity); ConfigError otherwise.
Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

enum class Padding { Periodic, Zero };

namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor activation(const Tensor& x, Activation act);
Tensor activation(const Tensor& x, const std::string& name);

// y = x W + b over the last axis; W is [cin, cout], b is [cout] or undefined.
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);

// Per-channel constant affine map y = x * s[c] + t[c]; not trainable.
Tensor channel_affine(const Tensor& x, const std::vector<double>& s, const std::vector<double>& t);

Tensor concat_channels(const Tensor& a, const Tensor& b);

// Zero padding of `pad` cells on both sides of every spatial axis, and its inverse.
Tensor pad_spatial(const Tensor& x, std::size_t pad);
Tensor crop_spatial(const Tensor& x, std::size_t pad);

// Cyclic shift of every spatial axis; shifts[i] applies to spatial axis i.
Tensor roll(const Tensor& x, const std::vector<long>& shifts);

// Cross-correlation with a centred k^d stencil. W is [k, (k,) cin, cout], b is
// [cout] or undefined. Even k raises ArgumentError.
Tensor conv_spatial(const Tensor& x, const Tensor& W, const Tensor& b, Padding mode);

// Where `x` equals `value`, replace y by value (no gradient flows there).
Tensor mask_fill(const Tensor& y, const Tensor& x, double value);

// y * psi + g with psi and g shaped like one sample of y (broadcast over batch).
Tensor field_mul_add(const Tensor& y, const Tensor& psi, const Tensor& g);

}  // namespace ops

// Scalar activation helpers, exposed for oracles in tests.
double activation_value(Activation a, double x);
double activation_derivative(Activation a, double x);

}  // namespace opforge
