#pragma once

#include "opforge/kernels.hpp"

namespace opforge::kernels::detail {

// Source index for output point p and tap t, or -1 outside a zero-padded field.
inline long tap_source(const ConvGeom& g, std::size_t p, std::size_t t) {
  long half = static_cast<long>(g.k / 2);
  if (g.dims == 1) {
    long q = static_cast<long>(p) + static_cast<long>(t) - half;
    long n = static_cast<long>(g.n0);
    if (g.periodic) return ((q % n) + n) % n;
    return (q < 0 || q >= n) ? -1 : q;
  }
  long n0 = static_cast<long>(g.n0), n1 = static_cast<long>(g.n1);
  long p0 = static_cast<long>(p / g.n1), p1 = static_cast<long>(p % g.n1);
  long q0 = p0 + static_cast<long>(t / g.k) - half;
  long q1 = p1 + static_cast<long>(t % g.k) - half;
  if (g.periodic) {
    q0 = ((q0 % n0) + n0) % n0;
    q1 = ((q1 % n1) + n1) % n1;
  } else if (q0 < 0 || q0 >= n0 || q1 < 0 || q1 >= n1) {
    return -1;
  }
  return q0 * n1 + q1;
}

// Output point that reads source point q through tap t, or -1.
inline long tap_target(const ConvGeom& g, std::size_t q, std::size_t t) {
  long half = static_cast<long>(g.k / 2);
  if (g.dims == 1) {
    long p = static_cast<long>(q) - static_cast<long>(t) + half;
    long n = static_cast<long>(g.n0);
    if (g.periodic) return ((p % n) + n) % n;
    return (p < 0 || p >= n) ? -1 : p;
  }
  long n0 = static_cast<long>(g.n0), n1 = static_cast<long>(g.n1);
  long q0 = static_cast<long>(q / g.n1), q1 = static_cast<long>(q % g.n1);
  long p0 = q0 - static_cast<long>(t / g.k) + half;
  long p1 = q1 - static_cast<long>(t % g.k) + half;
  if (g.periodic) {
    p0 = ((p0 % n0) + n0) % n0;
    p1 = ((p1 % n1) + n1) % n1;
  } else if (p0 < 0 || p0 >= n0 || p1 < 0 || p1 >= n1) {
    return -1;
  }
  return p0 * n1 + p1;
}

// Node with no coordinate on the stored boundary.
inline bool interior(const GridGeom& g, std::size_t idx) {
  if (g.dims == 1) return idx != 0;
  return idx / g.n != 0 && idx % g.n != 0;
}

// -Laplacian_h u at one node; rows on the stored boundary are zero.
inline double neg_laplacian_at(const GridGeom& g, const double* u, std::size_t idx) {
  if (!interior(g, idx)) return 0.0;
  std::size_t n = g.n;
  double acc;
  if (g.dims == 1) {
    double right = idx + 1 < n ? u[idx + 1] : 0.0;
    acc = 2.0 * u[idx] - u[idx - 1] - right;
  } else {
    std::size_t i = idx / n, j = idx % n;
    double down = i + 1 < n ? u[idx + n] : 0.0;
    double right = j + 1 < n ? u[idx + 1] : 0.0;
    acc = 4.0 * u[idx] - u[idx - n] - down - u[idx - 1] - right;
  }
  return acc / (g.h * g.h);
}

// Flux form of -div(a grad u). Faces between two unknowns use the harmonic
// mean of a; faces touching the boundary use the cell's own a.
inline double darcy_at(const GridGeom& g, const double* a, const double* u, std::size_t idx) {
  if (!interior(g, idx)) return 0.0;
  std::size_t n = g.n;
  auto face = [&](long nb, bool nb_interior) {
    double an = nb_interior ? 2.0 * a[idx] * a[nb] / (a[idx] + a[nb]) : a[idx];
    double un = nb < 0 ? 0.0 : u[nb];
    return an * (u[idx] - un);
  };
  double acc = 0.0;
  if (g.dims == 1) {
    acc += face(static_cast<long>(idx - 1), idx - 1 != 0);
    acc += face(idx + 1 < n ? static_cast<long>(idx + 1) : -1, idx + 1 < n);
  } else {
    std::size_t i = idx / n, j = idx % n;
    acc += face(static_cast<long>(idx - n), i - 1 != 0);
    acc += face(i + 1 < n ? static_cast<long>(idx + n) : -1, i + 1 < n);
    acc += face(static_cast<long>(idx - 1), j - 1 != 0);
    acc += face(j + 1 < n ? static_cast<long>(idx + 1) : -1, j + 1 < n);
  }
  return acc / (g.h * g.h);
}

}  // namespace opforge::kernels::detail
