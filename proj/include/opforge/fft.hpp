#pragma once

// Discrete Fourier transforms of real fields and per-mode channel mixing.
//
// Forward transforms are unnormalized, X[k] = sum_x x[x] exp(-2 pi i k x / n);
// inverses carry the 1/n. Fields here are single samples laid out as
// [n_1, ..., n_d, channels]; the last spatial axis keeps n/2+1 coefficients.

#include <complex>
#include <cstddef>
#include <vector>

#include "opforge/tensor.hpp"

namespace opforge {

using cdouble = std::complex<double>;

// In-place complex DFT of any length (radix-2, Bluestein otherwise). Both
// directions are unnormalized here.
void fft_inplace(std::vector<cdouble>& a, bool inverse);

struct SpectralCoeffs {
  std::vector<std::size_t> grid;     // extents of the real field
  std::vector<std::size_t> extents;  // stored extents; last is grid.back()/2+1
  std::size_t channels = 0;
  std::vector<double> data;          // [extents..., channels, (re, im)]

  std::size_t modes() const;
  cdouble get(std::size_t flat_mode, std::size_t c) const {
    return {data[(flat_mode * channels + c) * 2], data[(flat_mode * channels + c) * 2 + 1]};
  }
  void set(std::size_t flat_mode, std::size_t c, cdouble v) {
    data[(flat_mode * channels + c) * 2] = v.real();
    data[(flat_mode * channels + c) * 2 + 1] = v.imag();
  }
};

// Learnable per-mode kernel with k_max retained frequencies per axis. The
// last axis holds frequencies 0..k_max-1; every other axis holds 2*k_max rows
// where row r < k_max is frequency r and row r >= k_max is r - 2*k_max.
// Layout [rows..., cin, cout, (re, im)].
struct SpectralKernel {
  std::size_t dims = 1;
  std::size_t kmax = 1;
  std::size_t cin = 1, cout = 1;
  std::vector<double> data;

  static Shape shape_for(std::size_t dims, std::size_t kmax, std::size_t cin, std::size_t cout);
  std::size_t modes() const;
};

// Signed frequency held by a kernel row on a non-last axis.
long kernel_row_frequency(std::size_t row, std::size_t kmax);

SpectralCoeffs rfft_nd(const Tensor& x, const std::vector<std::size_t>& spatial_dims);
Tensor irfft_nd(const SpectralCoeffs& coeffs);

// Per retained mode, out[:, o] = sum_i W[i, o] in[:, i]; unretained modes are
// zero. Kernel rows that fold onto the same grid frequency add up.
SpectralCoeffs spectral_multiply(const SpectralCoeffs& coeffs, const SpectralKernel& weights);

// Sum over all modes of |X|^2 counting each stored half-spectrum entry with
// its conjugate twin, divided by the number of grid points.
double spectral_energy(const SpectralCoeffs& coeffs);

}  // namespace opforge
