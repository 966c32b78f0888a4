#include "opforge/fft.hpp"

#include <cmath>
#include <numbers>

#include "opforge/error.hpp"

namespace opforge {

namespace {

// exp(sign * 2 pi i * num / den) with the angle reduced in integers first.
cdouble unit_root(long long num, long long den, int sign) {
  num %= den;
  if (num < 0) num += den;
  double ang = 2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(den);
  return {std::cos(ang), sign * std::sin(ang)};
}

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

void fft_radix2(std::vector<cdouble>& a, bool inverse) {
  std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  int sign = inverse ? 1 : -1;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    std::size_t half = len / 2;
    std::vector<cdouble> tw(half);
    for (std::size_t k = 0; k < half; ++k)
      tw[k] = unit_root(static_cast<long long>(k), static_cast<long long>(len), sign);
    for (std::size_t i = 0; i < n; i += len)
      for (std::size_t k = 0; k < half; ++k) {
        cdouble u = a[i + k], v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
  }
}

void fft_bluestein(std::vector<cdouble>& a, bool inverse) {
  std::size_t n = a.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  int sign = inverse ? 1 : -1;
  // chirp w_k = exp(sign * i pi k^2 / n), k^2 reduced mod 2n
  std::vector<cdouble> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    long long kk = static_cast<long long>(k) * static_cast<long long>(k) % static_cast<long long>(2 * n);
    w[k] = unit_root(kk, static_cast<long long>(2 * n), sign);
  }
  std::vector<cdouble> A(m), B(m);
  for (std::size_t k = 0; k < n; ++k) A[k] = a[k] * w[k];
  B[0] = std::conj(w[0]);
  for (std::size_t k = 1; k < n; ++k) B[k] = B[m - k] = std::conj(w[k]);
  fft_radix2(A, false);
  fft_radix2(B, false);
  for (std::size_t k = 0; k < m; ++k) A[k] *= B[k];
  fft_radix2(A, true);
  double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = A[k] * inv_m * w[k];
}

std::size_t product(const std::vector<std::size_t>& v) {
  std::size_t p = 1;
  for (auto x : v) p *= x;
  return p;
}

// Applies a complex DFT along `axis` of a buffer with the given extents,
// where each element is `channels` complex numbers.
void fft_axis(std::vector<cdouble>& buf, const std::vector<std::size_t>& ext, std::size_t axis,
              std::size_t channels, bool inverse) {
  std::size_t n = ext[axis];
  std::size_t outer = 1, inner = channels;
  for (std::size_t i = 0; i < axis; ++i) outer *= ext[i];
  for (std::size_t i = axis + 1; i < ext.size(); ++i) inner *= ext[i];
  std::vector<cdouble> line(n);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t t = 0; t < inner; ++t) {
      for (std::size_t j = 0; j < n; ++j) line[j] = buf[(o * n + j) * inner + t];
      fft_inplace(line, inverse);
      for (std::size_t j = 0; j < n; ++j) buf[(o * n + j) * inner + t] = line[j];
    }
}

}  // namespace

void fft_inplace(std::vector<cdouble>& a, bool inverse) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size()))
    fft_radix2(a, inverse);
  else
    fft_bluestein(a, inverse);
}

std::size_t SpectralCoeffs::modes() const { return product(extents); }

Shape SpectralKernel::shape_for(std::size_t dims, std::size_t kmax, std::size_t cin, std::size_t cout) {
  Shape s;
  for (std::size_t d = 0; d + 1 < dims; ++d) s.push_back(2 * kmax);
  s.push_back(kmax);
  s.push_back(cin);
  s.push_back(cout);
  s.push_back(2);
  return s;
}

std::size_t SpectralKernel::modes() const {
  std::size_t m = kmax;
  for (std::size_t d = 0; d + 1 < dims; ++d) m *= 2 * kmax;
  return m;
}

long kernel_row_frequency(std::size_t row, std::size_t kmax) {
  return row < kmax ? static_cast<long>(row) : static_cast<long>(row) - 2 * static_cast<long>(kmax);
}

SpectralCoeffs rfft_nd(const Tensor& x, const std::vector<std::size_t>& spatial_dims) {
  if (x.rank() < 2) throw ShapeError("rfft_nd expects [spatial..., channels], got " + shape_str(x.shape()));
  std::size_t d = x.rank() - 1;
  for (auto a : spatial_dims)
    if (a >= d) throw ShapeError("rfft_nd: axis " + std::to_string(a) + " is not a spatial axis of " + shape_str(x.shape()));
  if (spatial_dims.size() != d)
    throw ShapeError("rfft_nd transforms every spatial axis; got " + std::to_string(spatial_dims.size()) + " of " +
                     std::to_string(d));
  for (std::size_t i = 0; i < d; ++i)
    if (spatial_dims[i] != i) throw ShapeError("rfft_nd: spatial axes must be listed in order");

  SpectralCoeffs out;
  out.grid.assign(x.shape().begin(), x.shape().begin() + static_cast<long>(d));
  for (auto n : out.grid)
    if (n < 2) throw ShapeError("rfft_nd: spatial extents must be at least 2, got " + shape_str(x.shape()));
  out.channels = x.shape().back();
  out.extents = out.grid;
  std::size_t n_last = out.grid.back();
  out.extents.back() = n_last / 2 + 1;

  std::size_t C = out.channels;
  std::size_t rows = product(out.grid) / n_last;
  auto v = x.values();
  std::vector<cdouble> buf(rows * out.extents.back() * C);
  std::vector<cdouble> line(n_last);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < n_last; ++j) line[j] = v[(r * n_last + j) * C + c];
      fft_inplace(line, false);
      for (std::size_t k = 0; k < out.extents.back(); ++k) buf[(r * out.extents.back() + k) * C + c] = line[k];
    }
  for (std::size_t axis = 0; axis + 1 < d; ++axis) fft_axis(buf, out.extents, axis, C, false);

  out.data.resize(buf.size() * 2);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    out.data[2 * i] = buf[i].real();
    out.data[2 * i + 1] = buf[i].imag();
  }
  return out;
}

Tensor irfft_nd(const SpectralCoeffs& coeffs) {
  std::size_t d = coeffs.grid.size();
  if (d == 0 || coeffs.extents.size() != d) throw ShapeError("irfft_nd: malformed coefficients");
  std::size_t C = coeffs.channels;
  std::size_t n_last = coeffs.grid.back(), k_last = coeffs.extents.back();
  std::vector<cdouble> buf(coeffs.data.size() / 2);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = {coeffs.data[2 * i], coeffs.data[2 * i + 1]};
  for (std::size_t axis = 0; axis + 1 < d; ++axis) fft_axis(buf, coeffs.extents, axis, C, true);

  std::size_t rows = product(coeffs.grid) / n_last;
  std::vector<double> out(rows * n_last * C);
  std::vector<cdouble> line(n_last);
  double norm = 1.0 / static_cast<double>(product(coeffs.grid));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      std::fill(line.begin(), line.end(), cdouble{});
      for (std::size_t k = 0; k < k_last && k < n_last; ++k) {
        bool self_conjugate = k == 0 || 2 * k == n_last;
        line[k] = buf[(r * k_last + k) * C + c] * (self_conjugate ? 1.0 : 2.0);
      }
      fft_inplace(line, true);
      for (std::size_t j = 0; j < n_last; ++j) out[(r * n_last + j) * C + c] = line[j].real() * norm;
    }
  Shape shape = coeffs.grid;
  shape.push_back(C);
  return Tensor::from(std::move(shape), std::move(out));
}

SpectralCoeffs spectral_multiply(const SpectralCoeffs& coeffs, const SpectralKernel& weights) {
  std::size_t d = coeffs.grid.size();
  if (weights.cin != coeffs.channels)
    throw ShapeError("spectral_multiply: kernel expects " + std::to_string(weights.cin) + " channels, coefficients have " +
                     std::to_string(coeffs.channels));
  if (d < 1 || d > 2) throw ShapeError("spectral_multiply supports 1D and 2D fields");
  if (weights.dims != d) throw ShapeError("spectral_multiply: kernel dimension does not match coefficients");
  if (weights.kmax > coeffs.extents.back())
    throw ShapeError("spectral_multiply: kernel keeps more modes than the coefficients store");
  for (std::size_t a = 0; a + 1 < d; ++a)
    if (weights.kmax > coeffs.grid[a] / 2 + 1)
      throw ShapeError("spectral_multiply: kernel keeps more modes than the grid resolves");
  if (weights.data.size() != weights.modes() * weights.cin * weights.cout * 2)
    throw ShapeError("spectral_multiply: kernel data size mismatch");

  SpectralCoeffs out;
  out.grid = coeffs.grid;
  out.extents = coeffs.extents;
  out.channels = weights.cout;
  out.data.assign(coeffs.modes() * weights.cout * 2, 0.0);

  std::size_t K = weights.kmax, cin = weights.cin, cout = weights.cout;
  std::size_t k_last = coeffs.extents.back();
  auto mix = [&](std::size_t kernel_mode, std::size_t coeff_mode) {
    for (std::size_t o = 0; o < cout; ++o) {
      cdouble acc = out.get(coeff_mode, o);
      for (std::size_t i = 0; i < cin; ++i) {
        const double* w = &weights.data[((kernel_mode * cin + i) * cout + o) * 2];
        acc += cdouble(w[0], w[1]) * coeffs.get(coeff_mode, i);
      }
      out.set(coeff_mode, o, acc);
    }
  };
  if (d == 1) {
    for (std::size_t k = 0; k < K; ++k) mix(k, k);
  } else {
    long n0 = static_cast<long>(coeffs.grid[0]);
    for (std::size_t r = 0; r < 2 * K; ++r) {
      long s = ((kernel_row_frequency(r, K) % n0) + n0) % n0;
      for (std::size_t k = 0; k < K; ++k) mix(r * K + k, static_cast<std::size_t>(s) * k_last + k);
    }
  }
  return out;
}

double spectral_energy(const SpectralCoeffs& coeffs) {
  std::size_t n_last = coeffs.grid.back(), k_last = coeffs.extents.back();
  double total = 0.0;
  for (std::size_t m = 0; m < coeffs.modes(); ++m) {
    std::size_t k = m % k_last;
    double w = (k == 0 || 2 * k == n_last) ? 1.0 : 2.0;
    for (std::size_t c = 0; c < coeffs.channels; ++c) total += w * std::norm(coeffs.get(m, c));
  }
  return total / static_cast<double>(product(coeffs.grid));
}

}  // namespace opforge
