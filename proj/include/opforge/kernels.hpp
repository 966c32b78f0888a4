#pragma once

// Raw compute kernels on row-major float64 buffers.
//
// Each kernel has a plain serial reference in kernels::serial and an OpenMP
// version in kernels::parallel. Parallel loops only split independent
// outputs and keep the per-output summation order of the reference, so both
// produce identical bits. The dispatching functions at namespace level pick
// one according to the process-wide backend switch.

#include <cstddef>

namespace opforge::kernels {

enum class Backend { Serial, Parallel };

void set_backend(Backend b);
Backend backend();

class BackendScope {
 public:
  explicit BackendScope(Backend b) : prev_(backend()) { set_backend(b); }
  ~BackendScope() { set_backend(prev_); }
  BackendScope(const BackendScope&) = delete;
  BackendScope& operator=(const BackendScope&) = delete;

 private:
  Backend prev_;
};

// Convolution geometry. Field layout is [batch, n0, (n1), channels] and the
// weight layout is [k^dims taps, cin, cout]; taps are centred.
struct ConvGeom {
  std::size_t batch = 1;
  std::size_t dims = 1;
  std::size_t n0 = 1, n1 = 1;
  std::size_t k = 3;
  std::size_t cin = 1, cout = 1;
  bool periodic = true;

  std::size_t points() const { return dims == 1 ? n0 : n0 * n1; }
  std::size_t taps() const { return dims == 1 ? k : k * k; }
};

// Stencil geometry on the Dirichlet grid: `n` stored nodes per dimension,
// node 0 is the boundary, node n is the implicit far boundary.
struct GridGeom {
  std::size_t dims = 1;
  std::size_t n = 2;
  double h = 0.5;

  std::size_t points() const { return dims == 1 ? n : n * n; }
};

#define OPFORGE_KERNEL_DECLS                                                                              \
  /* y[m,o] = b[o] + sum_c x[m,c] W[c,o]; b may be null */                                                \
  void linear_fwd(const double* x, const double* W, const double* b, double* y, std::size_t M,            \
                  std::size_t cin, std::size_t cout);                                                     \
  /* gx[m,c] += sum_o gy[m,o] W[c,o] */                                                                   \
  void linear_bwd_input(const double* gy, const double* W, double* gx, std::size_t M, std::size_t cin,    \
                        std::size_t cout);                                                                \
  /* gW[c,o] += sum_m x[m,c] gy[m,o] */                                                                   \
  void linear_bwd_weight(const double* x, const double* gy, double* gW, std::size_t M, std::size_t cin,   \
                         std::size_t cout);                                                               \
  /* y[o,i,t] (+)= sum_j A[i,j] x[o,j,t], A is rows x cols */                                             \
  void axis_map(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y,          \
                std::size_t outer, std::size_t inner, bool accumulate);                                   \
  /* y[o,j,t] (+)= sum_i A[i,j] x[o,i,t] */                                                               \
  void axis_map_t(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y,        \
                  std::size_t outer, std::size_t inner, bool accumulate);                                 \
  /* complex per-mode channel mixing, W is [modes, cin, cout, 2] */                                       \
  void mode_mix_fwd(const double* xr, const double* xi, const double* W, double* yr, double* yi,          \
                    std::size_t batch, std::size_t modes, std::size_t cin, std::size_t cout);             \
  void mode_mix_bwd_input(const double* gyr, const double* gyi, const double* W, double* gxr, double* gxi, \
                          std::size_t batch, std::size_t modes, std::size_t cin, std::size_t cout);       \
  void mode_mix_bwd_weight(const double* xr, const double* xi, const double* gyr, const double* gyi,      \
                           double* gW, std::size_t batch, std::size_t modes, std::size_t cin,             \
                           std::size_t cout);                                                             \
  void conv_fwd(const ConvGeom& g, const double* x, const double* W, const double* b, double* y);         \
  void conv_bwd_input(const ConvGeom& g, const double* gy, const double* W, double* gx);                   \
  void conv_bwd_weight(const ConvGeom& g, const double* x, const double* gy, double* gW);                 \
  /* out = -Laplacian_h u on interior nodes, 0 on the stored boundary */                                  \
  void neg_laplacian(const GridGeom& g, const double* u, double* out);                                     \
  /* out = -div(a grad u) with harmonic face averages */                                                   \
  void darcy_apply(const GridGeom& g, const double* a, const double* u, double* out);

namespace serial {
OPFORGE_KERNEL_DECLS
}
namespace parallel {
OPFORGE_KERNEL_DECLS
}
OPFORGE_KERNEL_DECLS

#undef OPFORGE_KERNEL_DECLS

}  // namespace opforge::kernels
