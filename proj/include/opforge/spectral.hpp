#pragma once

// Differentiable spectral operators on batched fields [B, n..., C].
//
// Both operators are separable real linear maps along each spatial axis, so
// they run as dense per-axis matrix applications. The matrices depend only
// on grid sizes and are cached process-wide.

#include <cstddef>
#include <vector>

#include "opforge/tensor.hpp"

namespace opforge {

// FNO kernel integral: truncated real DFT, per-mode complex channel mixing,
// inverse DFT. W has SpectralKernel::shape_for(d, kmax, cin, cout).
// Requires kmax <= n/2 + 1 on every axis.
Tensor spectral_conv(const Tensor& x, const Tensor& W, std::size_t kmax);

// Bandlimited resampling of every spatial axis to `target` points. Going up
// zero-pads the spectrum (the source Nyquist term split evenly between +-n/2);
// going down keeps only frequencies strictly below the target Nyquist.
// Values, not coefficients, are preserved.
Tensor resample_spectral(const Tensor& x, std::size_t target);
Tensor resample_spectral(const Tensor& x, const std::vector<std::size_t>& target);

// Dense [m, n] matrix of the 1D resampling map from n to m points.
const std::vector<double>& resample_matrix(std::size_t n, std::size_t m);

}  // namespace opforge
