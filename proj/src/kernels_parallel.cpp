// OpenMP kernels. Loop nests are reordered for contiguous inner loops, but
// every output keeps the accumulation order of kernels_serial.cpp.

#include <atomic>
#include <vector>

#include "kernels_internal.hpp"

namespace opforge::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::Parallel};
}

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

}  // namespace opforge::kernels

namespace opforge::kernels::parallel {

using detail::tap_source;
using detail::tap_target;

void linear_fwd(const double* x, const double* W, const double* b, double* y, std::size_t M, std::size_t cin,
                std::size_t cout) {
#pragma omp parallel for schedule(static)
  for (std::size_t m = 0; m < M; ++m) {
    double* row = y + m * cout;
    for (std::size_t o = 0; o < cout; ++o) row[o] = b ? b[o] : 0.0;
    for (std::size_t c = 0; c < cin; ++c) {
      double xv = x[m * cin + c];
      const double* w = W + c * cout;
      for (std::size_t o = 0; o < cout; ++o) row[o] += xv * w[o];
    }
  }
}

void linear_bwd_input(const double* gy, const double* W, double* gx, std::size_t M, std::size_t cin,
                      std::size_t cout) {
#pragma omp parallel for schedule(static)
  for (std::size_t m = 0; m < M; ++m) {
    const double* g = gy + m * cout;
    for (std::size_t c = 0; c < cin; ++c) {
      const double* w = W + c * cout;
      double acc = 0.0;
      for (std::size_t o = 0; o < cout; ++o) acc += g[o] * w[o];
      gx[m * cin + c] += acc;
    }
  }
}

void linear_bwd_weight(const double* x, const double* gy, double* gW, std::size_t M, std::size_t cin,
                       std::size_t cout) {
#pragma omp parallel
  {
    std::vector<double> acc(cout);
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < cin; ++c) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t m = 0; m < M; ++m) {
        double xv = x[m * cin + c];
        const double* g = gy + m * cout;
        for (std::size_t o = 0; o < cout; ++o) acc[o] += xv * g[o];
      }
      for (std::size_t o = 0; o < cout; ++o) gW[c * cout + o] += acc[o];
    }
  }
}

void axis_map(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y, std::size_t outer,
              std::size_t inner, bool accumulate) {
#pragma omp parallel
  {
    std::vector<double> acc(inner);
#pragma omp for schedule(static)
    for (std::size_t oi = 0; oi < outer * rows; ++oi) {
      std::size_t o = oi / rows, i = oi % rows;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < cols; ++j) {
        double a = A[i * cols + j];
        const double* src = x + (o * cols + j) * inner;
        for (std::size_t t = 0; t < inner; ++t) acc[t] += a * src[t];
      }
      double* dst = y + oi * inner;
      if (accumulate)
        for (std::size_t t = 0; t < inner; ++t) dst[t] += acc[t];
      else
        for (std::size_t t = 0; t < inner; ++t) dst[t] = acc[t];
    }
  }
}

void axis_map_t(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y,
                std::size_t outer, std::size_t inner, bool accumulate) {
#pragma omp parallel
  {
    std::vector<double> acc(inner);
#pragma omp for schedule(static)
    for (std::size_t oj = 0; oj < outer * cols; ++oj) {
      std::size_t o = oj / cols, j = oj % cols;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        double a = A[i * cols + j];
        const double* src = x + (o * rows + i) * inner;
        for (std::size_t t = 0; t < inner; ++t) acc[t] += a * src[t];
      }
      double* dst = y + oj * inner;
      if (accumulate)
        for (std::size_t t = 0; t < inner; ++t) dst[t] += acc[t];
      else
        for (std::size_t t = 0; t < inner; ++t) dst[t] = acc[t];
    }
  }
}

void mode_mix_fwd(const double* xr, const double* xi, const double* W, double* yr, double* yi, std::size_t batch,
                  std::size_t modes, std::size_t cin, std::size_t cout) {
#pragma omp parallel for schedule(static)
  for (std::size_t bm = 0; bm < batch * modes; ++bm) {
    std::size_t m = bm % modes;
    double* outr = yr + bm * cout;
    double* outi = yi + bm * cout;
    for (std::size_t o = 0; o < cout; ++o) outr[o] = outi[o] = 0.0;
    for (std::size_t i = 0; i < cin; ++i) {
      double vr = xr[bm * cin + i], vi = xi[bm * cin + i];
      const double* w = W + (m * cin + i) * cout * 2;
      for (std::size_t o = 0; o < cout; ++o) {
        outr[o] += w[2 * o] * vr - w[2 * o + 1] * vi;
        outi[o] += w[2 * o] * vi + w[2 * o + 1] * vr;
      }
    }
  }
}

void mode_mix_bwd_input(const double* gyr, const double* gyi, const double* W, double* gxr, double* gxi,
                        std::size_t batch, std::size_t modes, std::size_t cin, std::size_t cout) {
#pragma omp parallel for schedule(static)
  for (std::size_t bm = 0; bm < batch * modes; ++bm) {
    std::size_t m = bm % modes;
    const double* gr = gyr + bm * cout;
    const double* gi = gyi + bm * cout;
    for (std::size_t i = 0; i < cin; ++i) {
      const double* w = W + (m * cin + i) * cout * 2;
      double ar = 0.0, ai = 0.0;
      for (std::size_t o = 0; o < cout; ++o) {
        ar += w[2 * o] * gr[o] + w[2 * o + 1] * gi[o];
        ai += w[2 * o] * gi[o] - w[2 * o + 1] * gr[o];
      }
      gxr[bm * cin + i] += ar;
      gxi[bm * cin + i] += ai;
    }
  }
}

void mode_mix_bwd_weight(const double* xr, const double* xi, const double* gyr, const double* gyi, double* gW,
                         std::size_t batch, std::size_t modes, std::size_t cin, std::size_t cout) {
#pragma omp parallel
  {
    std::vector<double> acc(cout * 2);
#pragma omp for schedule(static)
    for (std::size_t mi = 0; mi < modes * cin; ++mi) {
      std::size_t m = mi / cin, i = mi % cin;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t b = 0; b < batch; ++b) {
        double vr = xr[(b * modes + m) * cin + i], vi = xi[(b * modes + m) * cin + i];
        const double* gr = gyr + (b * modes + m) * cout;
        const double* gi = gyi + (b * modes + m) * cout;
        for (std::size_t o = 0; o < cout; ++o) {
          acc[2 * o] += vr * gr[o] + vi * gi[o];
          acc[2 * o + 1] += vr * gi[o] - vi * gr[o];
        }
      }
      double* w = gW + mi * cout * 2;
      for (std::size_t o = 0; o < 2 * cout; ++o) w[o] += acc[o];
    }
  }
}

namespace {

// Source index table [points, taps], -1 for zero padding.
std::vector<long> source_table(const ConvGeom& g) {
  std::size_t P = g.points(), T = g.taps();
  std::vector<long> tab(P * T);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t t = 0; t < T; ++t) tab[p * T + t] = tap_source(g, p, t);
  return tab;
}

std::vector<long> target_table(const ConvGeom& g) {
  std::size_t P = g.points(), T = g.taps();
  std::vector<long> tab(P * T);
  for (std::size_t q = 0; q < P; ++q)
    for (std::size_t t = 0; t < T; ++t) tab[q * T + t] = tap_target(g, q, t);
  return tab;
}

}  // namespace

void conv_fwd(const ConvGeom& g, const double* x, const double* W, const double* b, double* y) {
  std::size_t P = g.points(), T = g.taps(), cin = g.cin, cout = g.cout;
  auto tab = source_table(g);
#pragma omp parallel for schedule(static)
  for (std::size_t bp = 0; bp < g.batch * P; ++bp) {
    std::size_t bi = bp / P, p = bp % P;
    double* row = y + bp * cout;
    for (std::size_t o = 0; o < cout; ++o) row[o] = b ? b[o] : 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      long q = tab[p * T + t];
      if (q < 0) continue;
      const double* src = x + (bi * P + static_cast<std::size_t>(q)) * cin;
      for (std::size_t c = 0; c < cin; ++c) {
        double xv = src[c];
        const double* w = W + (t * cin + c) * cout;
        for (std::size_t o = 0; o < cout; ++o) row[o] += xv * w[o];
      }
    }
  }
}

void conv_bwd_input(const ConvGeom& g, const double* gy, const double* W, double* gx) {
  std::size_t P = g.points(), T = g.taps(), cin = g.cin, cout = g.cout;
  auto tab = target_table(g);
#pragma omp parallel for schedule(static)
  for (std::size_t bq = 0; bq < g.batch * P; ++bq) {
    std::size_t bi = bq / P, q = bq % P;
    for (std::size_t c = 0; c < cin; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        long p = tab[q * T + t];
        if (p < 0) continue;
        const double* g_row = gy + (bi * P + static_cast<std::size_t>(p)) * cout;
        const double* w = W + (t * cin + c) * cout;
        for (std::size_t o = 0; o < cout; ++o) acc += g_row[o] * w[o];
      }
      gx[bq * cin + c] += acc;
    }
  }
}

void conv_bwd_weight(const ConvGeom& g, const double* x, const double* gy, double* gW) {
  std::size_t P = g.points(), T = g.taps(), cin = g.cin, cout = g.cout;
  auto tab = source_table(g);
#pragma omp parallel
  {
    std::vector<double> acc(cin * cout);
#pragma omp for schedule(static)
    for (std::size_t t = 0; t < T; ++t) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t bi = 0; bi < g.batch; ++bi)
        for (std::size_t p = 0; p < P; ++p) {
          long q = tab[p * T + t];
          if (q < 0) continue;
          const double* src = x + (bi * P + static_cast<std::size_t>(q)) * cin;
          const double* g_row = gy + (bi * P + p) * cout;
          for (std::size_t c = 0; c < cin; ++c) {
            double xv = src[c];
            double* a = acc.data() + c * cout;
            for (std::size_t o = 0; o < cout; ++o) a[o] += xv * g_row[o];
          }
        }
      double* w = gW + t * cin * cout;
      for (std::size_t k = 0; k < cin * cout; ++k) w[k] += acc[k];
    }
  }
}

void neg_laplacian(const GridGeom& g, const double* u, double* out) {
#pragma omp parallel for schedule(static)
  for (std::size_t idx = 0; idx < g.points(); ++idx) out[idx] = detail::neg_laplacian_at(g, u, idx);
}

void darcy_apply(const GridGeom& g, const double* a, const double* u, double* out) {
#pragma omp parallel for schedule(static)
  for (std::size_t idx = 0; idx < g.points(); ++idx) out[idx] = detail::darcy_at(g, a, u, idx);
}

}  // namespace opforge::kernels::parallel

namespace opforge::kernels {

#define OPFORGE_DISPATCH(name, ...)                   \
  if (backend() == Backend::Serial) {                 \
    serial::name(__VA_ARGS__);                        \
  } else {                                            \
    parallel::name(__VA_ARGS__);                      \
  }

void linear_fwd(const double* x, const double* W, const double* b, double* y, std::size_t M, std::size_t cin,
                std::size_t cout) {
  OPFORGE_DISPATCH(linear_fwd, x, W, b, y, M, cin, cout)
}
void linear_bwd_input(const double* gy, const double* W, double* gx, std::size_t M, std::size_t cin,
                      std::size_t cout) {
  OPFORGE_DISPATCH(linear_bwd_input, gy, W, gx, M, cin, cout)
}
void linear_bwd_weight(const double* x, const double* gy, double* gW, std::size_t M, std::size_t cin,
                       std::size_t cout) {
  OPFORGE_DISPATCH(linear_bwd_weight, x, gy, gW, M, cin, cout)
}
void axis_map(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y, std::size_t outer,
              std::size_t inner, bool accumulate) {
  OPFORGE_DISPATCH(axis_map, A, rows, cols, x, y, outer, inner, accumulate)
}
void axis_map_t(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y,
                std::size_t outer, std::size_t inner, bool accumulate) {
  OPFORGE_DISPATCH(axis_map_t, A, rows, cols, x, y, outer, inner, accumulate)
}
void mode_mix_fwd(const double* xr, const double* xi, const double* W, double* yr, double* yi, std::size_t batch,
                  std::size_t modes, std::size_t cin, std::size_t cout) {
  OPFORGE_DISPATCH(mode_mix_fwd, xr, xi, W, yr, yi, batch, modes, cin, cout)
}
void mode_mix_bwd_input(const double* gyr, const double* gyi, const double* W, double* gxr, double* gxi,
                        std::size_t batch, std::size_t modes, std::size_t cin, std::size_t cout) {
  OPFORGE_DISPATCH(mode_mix_bwd_input, gyr, gyi, W, gxr, gxi, batch, modes, cin, cout)
}
void mode_mix_bwd_weight(const double* xr, const double* xi, const double* gyr, const double* gyi, double* gW,
                         std::size_t batch, std::size_t modes, std::size_t cin, std::size_t cout) {
  OPFORGE_DISPATCH(mode_mix_bwd_weight, xr, xi, gyr, gyi, gW, batch, modes, cin, cout)
}
void conv_fwd(const ConvGeom& g, const double* x, const double* W, const double* b, double* y) {
  OPFORGE_DISPATCH(conv_fwd, g, x, W, b, y)
}
void conv_bwd_input(const ConvGeom& g, const double* gy, const double* W, double* gx) {
  OPFORGE_DISPATCH(conv_bwd_input, g, gy, W, gx)
}
void conv_bwd_weight(const ConvGeom& g, const double* x, const double* gy, double* gW) {
  OPFORGE_DISPATCH(conv_bwd_weight, g, x, gy, gW)
}
void neg_laplacian(const GridGeom& g, const double* u, double* out) { OPFORGE_DISPATCH(neg_laplacian, g, u, out) }
void darcy_apply(const GridGeom& g, const double* a, const double* u, double* out) {
  OPFORGE_DISPATCH(darcy_apply, g, a, u, out)
}

#undef OPFORGE_DISPATCH

}  // namespace opforge::kernels
