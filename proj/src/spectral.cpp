#include "opforge/spectral.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>

#include "opforge/error.hpp"
#include "opforge/fft.hpp"
#include "opforge/kernels.hpp"

namespace opforge {

using detail::make_result;
using detail::Node;

namespace {

double trig_cos(long long num, long long den) {
  num %= den;
  if (num < 0) num += den;
  return std::cos(2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(den));
}

double trig_sin(long long num, long long den) {
  num %= den;
  if (num < 0) num += den;
  return std::sin(2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(den));
}

using Matrix = std::vector<double>;

// Matrices used by the spectral convolution along one axis of size n.
struct AxisDft {
  // half-spectrum axis: K x n forward, n x K inverse
  Matrix fc, fs, gc, gs;
  // full axis with 2K signed rows: 2K x n forward, n x 2K inverse
  Matrix cm, sm, neg_sm, cinv, sinv, neg_sinv;
};

AxisDft build_half_axis(std::size_t n, std::size_t K) {
  AxisDft a;
  a.fc.resize(K * n);
  a.fs.resize(K * n);
  a.gc.resize(n * K);
  a.gs.resize(n * K);
  auto N = static_cast<long long>(n);
  for (std::size_t k = 0; k < K; ++k) {
    double ck = (k == 0 || 2 * k == n) ? 1.0 : 2.0;
    for (std::size_t x = 0; x < n; ++x) {
      long long ph = static_cast<long long>(k * x);
      double c = trig_cos(ph, N), s = trig_sin(ph, N);
      a.fc[k * n + x] = c;
      a.fs[k * n + x] = -s;
      a.gc[x * K + k] = ck * c / static_cast<double>(n);
      a.gs[x * K + k] = -ck * s / static_cast<double>(n);
    }
  }
  return a;
}

AxisDft build_full_axis(std::size_t n, std::size_t K) {
  AxisDft a;
  std::size_t R = 2 * K;
  a.cm.resize(R * n);
  a.sm.resize(R * n);
  a.neg_sm.resize(R * n);
  a.cinv.resize(n * R);
  a.sinv.resize(n * R);
  a.neg_sinv.resize(n * R);
  auto N = static_cast<long long>(n);
  for (std::size_t r = 0; r < R; ++r) {
    long long f = kernel_row_frequency(r, K);
    for (std::size_t x = 0; x < n; ++x) {
      long long ph = f * static_cast<long long>(x);
      double c = trig_cos(ph, N), s = trig_sin(ph, N);
      a.cm[r * n + x] = c;
      a.sm[r * n + x] = s;
      a.neg_sm[r * n + x] = -s;
      a.cinv[x * R + r] = c / static_cast<double>(n);
      a.sinv[x * R + r] = s / static_cast<double>(n);
      a.neg_sinv[x * R + r] = -s / static_cast<double>(n);
    }
  }
  return a;
}

std::mutex g_cache_mutex;

const AxisDft& axis_dft(std::size_t n, std::size_t K, bool full) {
  static std::map<std::tuple<std::size_t, std::size_t, bool>, std::unique_ptr<AxisDft>> cache;
  std::lock_guard lock(g_cache_mutex);
  auto& slot = cache[{n, K, full}];
  if (!slot) slot = std::make_unique<AxisDft>(full ? build_full_axis(n, K) : build_half_axis(n, K));
  return *slot;
}

Matrix build_resample(std::size_t n, std::size_t m) {
  Matrix A(m * n, 0.0);
  if (m == n) {
    for (std::size_t i = 0; i < n; ++i) A[i * n + i] = 1.0;
    return A;
  }
  // weights a_k of cos(2 pi k (x_j - x_i)) in the filtered trigonometric interpolant
  std::vector<double> weight;
  if (m > n) {
    for (std::size_t k = 0; 2 * k <= n; ++k) weight.push_back(k == 0 || 2 * k == n ? 1.0 : 2.0);
  } else {
    for (std::size_t k = 0; 2 * k < m; ++k) weight.push_back(k == 0 ? 1.0 : 2.0);
  }
  auto den = static_cast<long long>(m * n);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      long long diff = static_cast<long long>(j * n) - static_cast<long long>(i * m);
      double acc = 0.0;
      for (std::size_t k = 0; k < weight.size(); ++k)
        acc += weight[k] * trig_cos(static_cast<long long>(k) * diff, den);
      A[j * n + i] = acc / static_cast<double>(n);
    }
  return A;
}

}  // namespace

const std::vector<double>& resample_matrix(std::size_t n, std::size_t m) {
  static std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<Matrix>> cache;
  std::lock_guard lock(g_cache_mutex);
  auto& slot = cache[{n, m}];
  if (!slot) slot = std::make_unique<Matrix>(build_resample(n, m));
  return *slot;
}

Tensor spectral_conv(const Tensor& x, const Tensor& W, std::size_t K) {
  if (x.rank() < 3 || x.rank() > 4)
    throw ShapeError("spectral_conv expects [batch, spatial..., channels], got " + shape_str(x.shape()));
  std::size_t d = x.rank() - 2;
  std::size_t B = x.dim(0), cin = x.shape().back();
  if (K == 0) throw ConfigError("spectral_conv: at least one mode must be retained");
  if (W.rank() != d + 3) throw ShapeError("spectral_conv: kernel shape " + shape_str(W.shape()));
  std::size_t cout = W.dim(d + 1);
  if (W.shape() != SpectralKernel::shape_for(d, K, cin, cout))
    throw ShapeError("spectral_conv: kernel shape " + shape_str(W.shape()) + " does not fit " + std::to_string(K) +
                     " modes and " + std::to_string(cin) + " input channels");
  for (std::size_t a = 0; a < d; ++a)
    if (K > x.dim(1 + a) / 2 + 1)
      throw ResolutionError("resolution " + std::to_string(x.dim(1 + a)) + " cannot hold " + std::to_string(K) +
                            " Fourier modes (needs at least " + std::to_string(2 * (K - 1)) + ")");

  auto nx = x.node(), nw = W.node();
  const double* xv = x.values().data();
  const double* wv = W.values().data();
  Shape out_shape = x.shape();
  out_shape.back() = cout;

  if (d == 1) {
    std::size_t n = x.dim(1);
    const auto& ax = axis_dft(n, K, false);
    std::vector<double> xr(B * K * cin), xi(B * K * cin), yr(B * K * cout), yi(B * K * cout);
    kernels::axis_map(ax.fc.data(), K, n, xv, xr.data(), B, cin, false);
    kernels::axis_map(ax.fs.data(), K, n, xv, xi.data(), B, cin, false);
    kernels::mode_mix_fwd(xr.data(), xi.data(), wv, yr.data(), yi.data(), B, K, cin, cout);
    std::vector<double> y(B * n * cout);
    kernels::axis_map(ax.gc.data(), n, K, yr.data(), y.data(), B, cout, false);
    kernels::axis_map(ax.gs.data(), n, K, yi.data(), y.data(), B, cout, true);
    return make_result(
        std::move(out_shape), std::move(y), {x, W},
        [nx, nw, &ax, xr = std::move(xr), xi = std::move(xi), B, n, K, cin, cout](Node& self) {
          std::vector<double> gyr(B * K * cout), gyi(B * K * cout);
          kernels::axis_map_t(ax.gc.data(), n, K, self.grad.data(), gyr.data(), B, cout, false);
          kernels::axis_map_t(ax.gs.data(), n, K, self.grad.data(), gyi.data(), B, cout, false);
          if (nw->requires_grad)
            kernels::mode_mix_bwd_weight(xr.data(), xi.data(), gyr.data(), gyi.data(), nw->grad_buffer().data(), B, K,
                                         cin, cout);
          if (nx->requires_grad) {
            std::vector<double> gxr(B * K * cin, 0.0), gxi(B * K * cin, 0.0);
            kernels::mode_mix_bwd_input(gyr.data(), gyi.data(), nw->value.data(), gxr.data(), gxi.data(), B, K, cin,
                                        cout);
            double* gx = nx->grad_buffer().data();
            kernels::axis_map_t(ax.fc.data(), K, n, gxr.data(), gx, B, cin, true);
            kernels::axis_map_t(ax.fs.data(), K, n, gxi.data(), gx, B, cin, true);
          }
        });
  }

  std::size_t n0 = x.dim(1), n1 = x.dim(2), R = 2 * K, modes = R * K;
  const auto& a1 = axis_dft(n1, K, false);
  const auto& a0 = axis_dft(n0, K, true);
  // stage along the last axis: [B, n0, n1, cin] -> [B, n0, K, cin]
  std::vector<double> zr(B * n0 * K * cin), zi(B * n0 * K * cin);
  kernels::axis_map(a1.fc.data(), K, n1, xv, zr.data(), B * n0, cin, false);
  kernels::axis_map(a1.fs.data(), K, n1, xv, zi.data(), B * n0, cin, false);
  // complex stage along the first axis: [B, n0, K, cin] -> [B, 2K, K, cin]
  std::size_t inner_in = K * cin, inner_out = K * cout;
  std::vector<double> xr(B * modes * cin), xi(B * modes * cin);
  kernels::axis_map(a0.cm.data(), R, n0, zr.data(), xr.data(), B, inner_in, false);
  kernels::axis_map(a0.sm.data(), R, n0, zi.data(), xr.data(), B, inner_in, true);
  kernels::axis_map(a0.cm.data(), R, n0, zi.data(), xi.data(), B, inner_in, false);
  kernels::axis_map(a0.neg_sm.data(), R, n0, zr.data(), xi.data(), B, inner_in, true);
  std::vector<double> yr(B * modes * cout), yi(B * modes * cout);
  kernels::mode_mix_fwd(xr.data(), xi.data(), wv, yr.data(), yi.data(), B, modes, cin, cout);
  // inverse along the first axis: [B, 2K, K, cout] -> [B, n0, K, cout]
  std::vector<double> wr(B * n0 * K * cout), wi(B * n0 * K * cout);
  kernels::axis_map(a0.cinv.data(), n0, R, yr.data(), wr.data(), B, inner_out, false);
  kernels::axis_map(a0.neg_sinv.data(), n0, R, yi.data(), wr.data(), B, inner_out, true);
  kernels::axis_map(a0.cinv.data(), n0, R, yi.data(), wi.data(), B, inner_out, false);
  kernels::axis_map(a0.sinv.data(), n0, R, yr.data(), wi.data(), B, inner_out, true);
  // real inverse along the last axis
  std::vector<double> y(B * n0 * n1 * cout);
  kernels::axis_map(a1.gc.data(), n1, K, wr.data(), y.data(), B * n0, cout, false);
  kernels::axis_map(a1.gs.data(), n1, K, wi.data(), y.data(), B * n0, cout, true);

  return make_result(
      std::move(out_shape), std::move(y), {x, W},
      [nx, nw, &a0, &a1, xr = std::move(xr), xi = std::move(xi), B, n0, n1, K, R, modes, cin, cout, inner_in,
       inner_out](Node& self) {
        std::vector<double> gwr(B * n0 * K * cout), gwi(B * n0 * K * cout);
        kernels::axis_map_t(a1.gc.data(), n1, K, self.grad.data(), gwr.data(), B * n0, cout, false);
        kernels::axis_map_t(a1.gs.data(), n1, K, self.grad.data(), gwi.data(), B * n0, cout, false);
        std::vector<double> gyr(B * modes * cout), gyi(B * modes * cout);
        kernels::axis_map_t(a0.cinv.data(), n0, R, gwr.data(), gyr.data(), B, inner_out, false);
        kernels::axis_map_t(a0.sinv.data(), n0, R, gwi.data(), gyr.data(), B, inner_out, true);
        kernels::axis_map_t(a0.cinv.data(), n0, R, gwi.data(), gyi.data(), B, inner_out, false);
        kernels::axis_map_t(a0.neg_sinv.data(), n0, R, gwr.data(), gyi.data(), B, inner_out, true);
        if (nw->requires_grad)
          kernels::mode_mix_bwd_weight(xr.data(), xi.data(), gyr.data(), gyi.data(), nw->grad_buffer().data(), B,
                                       modes, cin, cout);
        if (!nx->requires_grad) return;
        std::vector<double> gxr(B * modes * cin, 0.0), gxi(B * modes * cin, 0.0);
        kernels::mode_mix_bwd_input(gyr.data(), gyi.data(), nw->value.data(), gxr.data(), gxi.data(), B, modes, cin,
                                    cout);
        std::vector<double> gzr(B * n0 * K * cin), gzi(B * n0 * K * cin);
        kernels::axis_map_t(a0.cm.data(), R, n0, gxr.data(), gzr.data(), B, inner_in, false);
        kernels::axis_map_t(a0.neg_sm.data(), R, n0, gxi.data(), gzr.data(), B, inner_in, true);
        kernels::axis_map_t(a0.sm.data(), R, n0, gxr.data(), gzi.data(), B, inner_in, false);
        kernels::axis_map_t(a0.cm.data(), R, n0, gxi.data(), gzi.data(), B, inner_in, true);
        double* gx = nx->grad_buffer().data();
        kernels::axis_map_t(a1.fc.data(), K, n1, gzr.data(), gx, B * n0, cin, true);
        kernels::axis_map_t(a1.fs.data(), K, n1, gzi.data(), gx, B * n0, cin, true);
      });
}

Tensor resample_spectral(const Tensor& x, std::size_t target) {
  if (x.rank() < 3) throw ShapeError("resample_spectral expects [batch, spatial..., channels]");
  return resample_spectral(x, std::vector<std::size_t>(x.rank() - 2, target));
}

Tensor resample_spectral(const Tensor& x, const std::vector<std::size_t>& target) {
  if (x.rank() < 3 || x.rank() > 4)
    throw ShapeError("resample_spectral expects [batch, spatial..., channels], got " + shape_str(x.shape()));
  std::size_t d = x.rank() - 2;
  if (target.size() != d) throw ShapeError("resample_spectral: one target extent per spatial axis required");
  for (std::size_t a = 0; a < d; ++a) {
    if (target[a] < 2) throw ArgumentError("resample_spectral: target resolution must be at least 2");
    if (x.dim(1 + a) < 2) throw ArgumentError("resample_spectral: source resolution must be at least 2");
  }
  bool same = true;
  for (std::size_t a = 0; a < d; ++a) same = same && target[a] == x.dim(1 + a);
  if (same) return x;

  std::size_t B = x.dim(0), C = x.shape().back();
  Shape src = x.shape();
  // per-axis passes; shapes[a] is the field before pass a
  std::vector<Shape> shapes{src};
  std::vector<const Matrix*> mats;
  for (std::size_t a = 0; a < d; ++a) {
    mats.push_back(&resample_matrix(shapes.back()[1 + a], target[a]));
    Shape next = shapes.back();
    next[1 + a] = target[a];
    shapes.push_back(next);
  }
  auto pass_geometry = [B, C](const Shape& s, std::size_t a) {
    std::size_t outer = B, inner = C;
    for (std::size_t i = 1; i < 1 + a; ++i) outer *= s[i];
    for (std::size_t i = 2 + a; i + 1 < s.size(); ++i) inner *= s[i];
    return std::pair{outer, inner};
  };
  std::vector<double> cur(x.values().begin(), x.values().end());
  for (std::size_t a = 0; a < d; ++a) {
    auto [outer, inner] = pass_geometry(shapes[a], a);
    std::vector<double> next(numel(shapes[a + 1]));
    kernels::axis_map(mats[a]->data(), shapes[a + 1][1 + a], shapes[a][1 + a], cur.data(), next.data(), outer, inner,
                      false);
    cur = std::move(next);
  }
  auto nx = x.node();
  return make_result(shapes.back(), std::move(cur), {x}, [nx, shapes, mats, pass_geometry, d](Node& self) {
    std::vector<double> g(self.grad.begin(), self.grad.end());
    for (std::size_t a = d; a-- > 0;) {
      auto [outer, inner] = pass_geometry(shapes[a], a);
      std::vector<double> prev(numel(shapes[a]));
      kernels::axis_map_t(mats[a]->data(), shapes[a + 1][1 + a], shapes[a][1 + a], g.data(), prev.data(), outer,
                          inner, false);
      g = std::move(prev);
    }
    auto gx = nx->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

}  // namespace opforge
