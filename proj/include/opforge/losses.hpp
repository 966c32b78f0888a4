#pragma once

// Losses return the sum over the batch plus the per-sample values, so
// callers can report means over a whole split.

#include <vector>

#include "opforge/tensor.hpp"

namespace opforge {

struct LossValue {
  Tensor total;                     // scalar, sum over the batch
  std::vector<double> per_sample;

  double value() const { return total.item(); }
};

// Per sample ||pred - target||_p / ||target||_p over all spatial points and
// channels. Differentiable in pred; a zero target raises DegenerateSampleError.
LossValue lp_relative(const Tensor& pred, const Tensor& target, double p);

// Relative H1 norm with the squared L2 norm of the values plus the squared L2
// norm of the first derivatives along every spatial axis. Derivatives use
// central differences inside and one-sided differences at the two ends.
LossValue h1_relative(const Tensor& pred, const Tensor& target, double h);

// alpha * ||-lap_h(u) - f||_p over interior nodes (first and last index of
// every axis excluded). u and f are [B, n, (n,) C].
LossValue poisson_residual_fd(const Tensor& u, const Tensor& f, double alpha, double p, double h);

LossValue combined_loss(const LossValue& data, const LossValue& phys);

}  // namespace opforge
