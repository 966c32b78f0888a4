// Reference kernels: the plainest loop nest for each definition.

#include "kernels_internal.hpp"

namespace opforge::kernels::serial {

using detail::tap_source;
using detail::tap_target;

void linear_fwd(const double* x, const double* W, const double* b, double* y, std::size_t M, std::size_t cin,
                std::size_t cout) {
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = b ? b[o] : 0.0;
      for (std::size_t c = 0; c < cin; ++c) acc += x[m * cin + c] * W[c * cout + o];
      y[m * cout + o] = acc;
    }
}

void linear_bwd_input(const double* gy, const double* W, double* gx, std::size_t M, std::size_t cin,
                      std::size_t cout) {
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t c = 0; c < cin; ++c) {
      double acc = 0.0;
      for (std::size_t o = 0; o < cout; ++o) acc += gy[m * cout + o] * W[c * cout + o];
      gx[m * cin + c] += acc;
    }
}

void linear_bwd_weight(const double* x, const double* gy, double* gW, std::size_t M, std::size_t cin,
                       std::size_t cout) {
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) acc += x[m * cin + c] * gy[m * cout + o];
      gW[c * cout + o] += acc;
    }
}

void axis_map(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y, std::size_t outer,
              std::size_t inner, bool accumulate) {
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t t = 0; t < inner; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += A[i * cols + j] * x[(o * cols + j) * inner + t];
        double& out = y[(o * rows + i) * inner + t];
        out = accumulate ? out + acc : acc;
      }
}

void axis_map_t(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y,
                std::size_t outer, std::size_t inner, bool accumulate) {
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < cols; ++j)
      for (std::size_t t = 0; t < inner; ++t) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += A[i * cols + j] * x[(o * rows + i) * inner + t];
        double& out = y[(o * cols + j) * inner + t];
        out = accumulate ? out + acc : acc;
      }
}

void mode_mix_fwd(const double* xr, const double* xi, const double* W, double* yr, double* yi, std::size_t batch,
                  std::size_t modes, std::size_t cin, std::size_t cout) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t m = 0; m < modes; ++m)
      for (std::size_t o = 0; o < cout; ++o) {
        double ar = 0.0, ai = 0.0;
        for (std::size_t i = 0; i < cin; ++i) {
          const double* w = W + ((m * cin + i) * cout + o) * 2;
          double vr = xr[(b * modes + m) * cin + i], vi = xi[(b * modes + m) * cin + i];
          ar += w[0] * vr - w[1] * vi;
          ai += w[0] * vi + w[1] * vr;
        }
        yr[(b * modes + m) * cout + o] = ar;
        yi[(b * modes + m) * cout + o] = ai;
      }
}

void mode_mix_bwd_input(const double* gyr, const double* gyi, const double* W, double* gxr, double* gxi,
                        std::size_t batch, std::size_t modes, std::size_t cin, std::size_t cout) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t m = 0; m < modes; ++m)
      for (std::size_t i = 0; i < cin; ++i) {
        double ar = 0.0, ai = 0.0;
        for (std::size_t o = 0; o < cout; ++o) {
          const double* w = W + ((m * cin + i) * cout + o) * 2;
          double gr = gyr[(b * modes + m) * cout + o], gi = gyi[(b * modes + m) * cout + o];
          ar += w[0] * gr + w[1] * gi;
          ai += w[0] * gi - w[1] * gr;
        }
        gxr[(b * modes + m) * cin + i] += ar;
        gxi[(b * modes + m) * cin + i] += ai;
      }
}

void mode_mix_bwd_weight(const double* xr, const double* xi, const double* gyr, const double* gyi, double* gW,
                         std::size_t batch, std::size_t modes, std::size_t cin, std::size_t cout) {
  for (std::size_t m = 0; m < modes; ++m)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t o = 0; o < cout; ++o) {
        double ar = 0.0, ai = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          double vr = xr[(b * modes + m) * cin + i], vi = xi[(b * modes + m) * cin + i];
          double gr = gyr[(b * modes + m) * cout + o], gi = gyi[(b * modes + m) * cout + o];
          ar += vr * gr + vi * gi;
          ai += vr * gi - vi * gr;
        }
        double* w = gW + ((m * cin + i) * cout + o) * 2;
        w[0] += ar;
        w[1] += ai;
      }
}

void conv_fwd(const ConvGeom& g, const double* x, const double* W, const double* b, double* y) {
  std::size_t P = g.points(), T = g.taps();
  for (std::size_t bi = 0; bi < g.batch; ++bi)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t o = 0; o < g.cout; ++o) {
        double acc = b ? b[o] : 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          long q = tap_source(g, p, t);
          if (q < 0) continue;
          for (std::size_t c = 0; c < g.cin; ++c)
            acc += x[(bi * P + static_cast<std::size_t>(q)) * g.cin + c] * W[(t * g.cin + c) * g.cout + o];
        }
        y[(bi * P + p) * g.cout + o] = acc;
      }
}

void conv_bwd_input(const ConvGeom& g, const double* gy, const double* W, double* gx) {
  std::size_t P = g.points(), T = g.taps();
  for (std::size_t bi = 0; bi < g.batch; ++bi)
    for (std::size_t q = 0; q < P; ++q)
      for (std::size_t c = 0; c < g.cin; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          long p = tap_target(g, q, t);
          if (p < 0) continue;
          for (std::size_t o = 0; o < g.cout; ++o)
            acc += gy[(bi * P + static_cast<std::size_t>(p)) * g.cout + o] * W[(t * g.cin + c) * g.cout + o];
        }
        gx[(bi * P + q) * g.cin + c] += acc;
      }
}

void conv_bwd_weight(const ConvGeom& g, const double* x, const double* gy, double* gW) {
  std::size_t P = g.points(), T = g.taps();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < g.cin; ++c)
      for (std::size_t o = 0; o < g.cout; ++o) {
        double acc = 0.0;
        for (std::size_t bi = 0; bi < g.batch; ++bi)
          for (std::size_t p = 0; p < P; ++p) {
            long q = tap_source(g, p, t);
            if (q < 0) continue;
            acc += x[(bi * P + static_cast<std::size_t>(q)) * g.cin + c] * gy[(bi * P + p) * g.cout + o];
          }
        gW[(t * g.cin + c) * g.cout + o] += acc;
      }
}

void neg_laplacian(const GridGeom& g, const double* u, double* out) {
  for (std::size_t idx = 0; idx < g.points(); ++idx) out[idx] = detail::neg_laplacian_at(g, u, idx);
}

void darcy_apply(const GridGeom& g, const double* a, const double* u, double* out) {
  for (std::size_t idx = 0; idx < g.points(); ++idx) out[idx] = detail::darcy_at(g, a, u, idx);
}

}  // namespace opforge::kernels::serial
