#include "opforge/ops.hpp"

#include <cmath>
#include <numbers>

#include "opforge/error.hpp"
#include "opforge/kernels.hpp"

namespace opforge {

using detail::make_result;
using detail::Node;

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "gelu") return Activation::Gelu;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + name + "' (expected tanh, relu, gelu, leaky_relu)");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Gelu: return "gelu";
    case Activation::LeakyRelu: return "leaky_relu";
  }
  return "identity";
}

namespace {
constexpr double kLeakySlope = 0.01;
}

double activation_value(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Gelu: return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
    case Activation::LeakyRelu: return x > 0.0 ? x : kLeakySlope * x;
  }
  return x;
}

double activation_derivative(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Gelu: {
      double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
      double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + x * pdf;
    }
    case Activation::LeakyRelu: return x > 0.0 ? 1.0 : kLeakySlope;
  }
  return 1.0;
}

namespace ops {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ");
}

void require_field(const Tensor& x, const char* what) {
  if (x.rank() < 3 || x.rank() > 4)
    throw ShapeError(std::string(what) + " expects [batch, spatial..., channels] with 1 or 2 spatial axes, got " +
                     shape_str(x.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto na = a.node(), nb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [na, nb](Node& self) {
    for (auto* n : {na.get(), nb.get()}) {
      if (!n->requires_grad) continue;
      auto g = n->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  auto na = a.node(), nb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [na, nb](Node& self) {
    if (na->requires_grad) {
      auto g = na->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (nb->requires_grad) {
      auto g = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto na = a.node(), nb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [na, nb](Node& self) {
    if (na->requires_grad) {
      auto g = na->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb->value[i];
    }
    if (nb->requires_grad) {
      auto g = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  auto na = a.node();
  return make_result(a.shape(), std::move(out), {a}, [na, s](Node& self) {
    auto g = na->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  auto na = a.node();
  return make_result({1}, {acc}, {a}, [na](Node& self) {
    auto g = na->grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor activation(const Tensor& x, Activation act) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = activation_value(act, xv[i]);
  auto nx = x.node();
  return make_result(x.shape(), std::move(out), {x}, [nx, act](Node& self) {
    auto g = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * activation_derivative(act, nx->value[i]);
  });
}

Tensor activation(const Tensor& x, const std::string& name) { return activation(x, parse_activation(name)); }

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.rank() != 2) throw ShapeError("linear: weight must be [cin, cout], got " + shape_str(W.shape()));
  std::size_t cin = W.dim(0), cout = W.dim(1);
  if (x.shape().back() != cin)
    throw ShapeError("linear: input has " + std::to_string(x.shape().back()) + " channels, weight expects " +
                     std::to_string(cin));
  if (b.defined() && (b.rank() != 1 || b.dim(0) != cout))
    throw ShapeError("linear: bias must be [" + std::to_string(cout) + "], got " + shape_str(b.shape()));
  std::size_t M = x.size() / cin;
  Shape shape = x.shape();
  shape.back() = cout;
  std::vector<double> out(M * cout);
  kernels::linear_fwd(x.values().data(), W.values().data(), b.defined() ? b.values().data() : nullptr, out.data(), M,
                      cin, cout);
  std::vector<Tensor> inputs{x, W};
  if (b.defined()) inputs.push_back(b);
  auto nx = x.node(), nw = W.node();
  auto nb = b.defined() ? b.node() : nullptr;
  return make_result(std::move(shape), std::move(out), inputs, [nx, nw, nb, M, cin, cout](Node& self) {
    if (nx->requires_grad)
      kernels::linear_bwd_input(self.grad.data(), nw->value.data(), nx->grad_buffer().data(), M, cin, cout);
    if (nw->requires_grad)
      kernels::linear_bwd_weight(nx->value.data(), self.grad.data(), nw->grad_buffer().data(), M, cin, cout);
    if (nb && nb->requires_grad) {
      auto g = nb->grad_buffer();
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t o = 0; o < cout; ++o) g[o] += self.grad[m * cout + o];
    }
  });
}

Tensor channel_affine(const Tensor& x, const std::vector<double>& s, const std::vector<double>& t) {
  std::size_t C = x.shape().back();
  if (s.size() != C || t.size() != C)
    throw ShapeError("channel_affine: expected " + std::to_string(C) + " per-channel constants");
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * s[i % C] + t[i % C];
  auto nx = x.node();
  return make_result(x.shape(), std::move(out), {x}, [nx, s, C](Node& self) {
    auto g = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s[i % C];
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank()) throw ShapeError("concat_channels: rank mismatch");
  for (std::size_t i = 0; i + 1 < a.rank(); ++i)
    if (a.dim(i) != b.dim(i))
      throw ShapeError("concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::size_t ca = a.shape().back(), cb = b.shape().back(), M = a.size() / ca;
  Shape shape = a.shape();
  shape.back() = ca + cb;
  std::vector<double> out(M * (ca + cb));
  auto av = a.values(), bv = b.values();
  for (std::size_t m = 0; m < M; ++m) {
    std::copy_n(av.data() + m * ca, ca, out.data() + m * (ca + cb));
    std::copy_n(bv.data() + m * cb, cb, out.data() + m * (ca + cb) + ca);
  }
  auto na = a.node(), nb = b.node();
  return make_result(std::move(shape), std::move(out), {a, b}, [na, nb, M, ca, cb](Node& self) {
    if (na->requires_grad) {
      auto g = na->grad_buffer();
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t c = 0; c < ca; ++c) g[m * ca + c] += self.grad[m * (ca + cb) + c];
    }
    if (nb->requires_grad) {
      auto g = nb->grad_buffer();
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t c = 0; c < cb; ++c) g[m * cb + c] += self.grad[m * (ca + cb) + ca + c];
    }
  });
}

namespace {

// Index map from a smaller field into a larger one that embeds it with an
// offset of `pad` cells per spatial axis.
std::vector<std::size_t> embed_index(const Shape& small, std::size_t pad) {
  std::size_t d = small.size() - 2, C = small.back();
  std::vector<std::size_t> idx(numel(small));
  std::size_t n0 = small[1], n1 = d == 2 ? small[2] : 1;
  std::size_t N0 = n0 + 2 * pad, N1 = d == 2 ? n1 + 2 * pad : 1;
  std::size_t k = 0;
  for (std::size_t b = 0; b < small[0]; ++b)
    for (std::size_t i = 0; i < n0; ++i)
      for (std::size_t j = 0; j < n1; ++j)
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t I = i + pad, J = d == 2 ? j + pad : 0;
          idx[k++] = ((b * N0 + I) * N1 + J) * C + c;
        }
  return idx;
}

}  // namespace

Tensor pad_spatial(const Tensor& x, std::size_t pad) {
  require_field(x, "pad_spatial");
  if (pad == 0) return x;
  Shape big = x.shape();
  for (std::size_t i = 1; i + 1 < big.size(); ++i) big[i] += 2 * pad;
  auto idx = embed_index(x.shape(), pad);
  std::vector<double> out(numel(big), 0.0);
  auto xv = x.values();
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = xv[k];
  auto nx = x.node();
  return make_result(std::move(big), std::move(out), {x}, [nx, idx = std::move(idx)](Node& self) {
    auto g = nx->grad_buffer();
    for (std::size_t k = 0; k < idx.size(); ++k) g[k] += self.grad[idx[k]];
  });
}

Tensor crop_spatial(const Tensor& x, std::size_t pad) {
  require_field(x, "crop_spatial");
  if (pad == 0) return x;
  Shape small = x.shape();
  for (std::size_t i = 1; i + 1 < small.size(); ++i) {
    if (small[i] <= 2 * pad) throw ShapeError("crop_spatial: padding exceeds extent " + shape_str(x.shape()));
    small[i] -= 2 * pad;
  }
  auto idx = embed_index(small, pad);
  std::vector<double> out(idx.size());
  auto xv = x.values();
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = xv[idx[k]];
  auto nx = x.node();
  return make_result(std::move(small), std::move(out), {x}, [nx, idx = std::move(idx)](Node& self) {
    auto g = nx->grad_buffer();
    for (std::size_t k = 0; k < idx.size(); ++k) g[idx[k]] += self.grad[k];
  });
}

Tensor roll(const Tensor& x, const std::vector<long>& shifts) {
  require_field(x, "roll");
  std::size_t d = x.rank() - 2;
  if (shifts.size() != d) throw ShapeError("roll: one shift per spatial axis required");
  const Shape& s = x.shape();
  std::size_t B = s[0], n0 = s[1], n1 = d == 2 ? s[2] : 1, C = s.back();
  std::vector<std::size_t> src(x.size());
  long s0 = shifts[0], s1 = d == 2 ? shifts[1] : 0;
  std::size_t k = 0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < n0; ++i)
      for (std::size_t j = 0; j < n1; ++j) {
        long I = ((static_cast<long>(i) - s0) % static_cast<long>(n0) + static_cast<long>(n0)) % static_cast<long>(n0);
        long J = ((static_cast<long>(j) - s1) % static_cast<long>(n1) + static_cast<long>(n1)) % static_cast<long>(n1);
        for (std::size_t c = 0; c < C; ++c)
          src[k++] = ((b * n0 + static_cast<std::size_t>(I)) * n1 + static_cast<std::size_t>(J)) * C + c;
      }
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[src[i]];
  auto nx = x.node();
  return make_result(s, std::move(out), {x}, [nx, src = std::move(src)](Node& self) {
    auto g = nx->grad_buffer();
    for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
  });
}

Tensor conv_spatial(const Tensor& x, const Tensor& W, const Tensor& b, Padding mode) {
  require_field(x, "conv_spatial");
  std::size_t d = x.rank() - 2;
  if (W.rank() != d + 2) throw ShapeError("conv_spatial: weight rank must be spatial dims + 2, got " + shape_str(W.shape()));
  std::size_t k = W.dim(0);
  if (k % 2 == 0) throw ArgumentError("conv_spatial: kernel size must be odd, got " + std::to_string(k));
  if (d == 2 && W.dim(1) != k) throw ArgumentError("conv_spatial: kernel must be square");
  kernels::ConvGeom g;
  g.batch = x.dim(0);
  g.dims = d;
  g.n0 = x.dim(1);
  g.n1 = d == 2 ? x.dim(2) : 1;
  g.k = k;
  g.cin = x.shape().back();
  g.cout = W.shape().back();
  g.periodic = mode == Padding::Periodic;
  if (W.dim(d) != g.cin)
    throw ShapeError("conv_spatial: weight expects " + std::to_string(W.dim(d)) + " input channels, field has " +
                     std::to_string(g.cin));
  if (b.defined() && (b.rank() != 1 || b.dim(0) != g.cout)) throw ShapeError("conv_spatial: bias shape mismatch");
  Shape shape = x.shape();
  shape.back() = g.cout;
  std::vector<double> out(numel(shape));
  kernels::conv_fwd(g, x.values().data(), W.values().data(), b.defined() ? b.values().data() : nullptr, out.data());
  std::vector<Tensor> inputs{x, W};
  if (b.defined()) inputs.push_back(b);
  auto nx = x.node(), nw = W.node();
  auto nb = b.defined() ? b.node() : nullptr;
  return make_result(std::move(shape), std::move(out), inputs, [nx, nw, nb, g](Node& self) {
    if (nx->requires_grad) kernels::conv_bwd_input(g, self.grad.data(), nw->value.data(), nx->grad_buffer().data());
    if (nw->requires_grad) kernels::conv_bwd_weight(g, nx->value.data(), self.grad.data(), nw->grad_buffer().data());
    if (nb && nb->requires_grad) {
      auto gb = nb->grad_buffer();
      std::size_t M = self.grad.size() / g.cout;
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t o = 0; o < g.cout; ++o) gb[o] += self.grad[m * g.cout + o];
    }
  });
}

Tensor mask_fill(const Tensor& y, const Tensor& x, double value) {
  require_same(y, x, "mask_fill");
  auto yv = y.values(), xv = x.values();
  std::vector<double> out(yv.begin(), yv.end());
  std::vector<char> hit(out.size(), 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (xv[i] == value) {
      out[i] = value;
      hit[i] = 1;
    }
  auto ny = y.node();
  return make_result(y.shape(), std::move(out), {y}, [ny, hit = std::move(hit)](Node& self) {
    auto g = ny->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!hit[i]) g[i] += self.grad[i];
  });
}

Tensor field_mul_add(const Tensor& y, const Tensor& psi, const Tensor& g) {
  std::size_t per = psi.size();
  if (psi.shape() != g.shape()) throw ShapeError("field_mul_add: psi and g shapes differ");
  Shape sample(y.shape().begin() + 1, y.shape().end());
  if (psi.shape() != sample)
    throw ShapeError("field_mul_add: psi " + shape_str(psi.shape()) + " does not match output sample " +
                     shape_str(sample));
  auto yv = y.values(), pv = psi.values(), gv = g.values();
  std::vector<double> out(yv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = yv[i] * pv[i % per] + gv[i % per];
  auto ny = y.node(), np = psi.node();
  return make_result(y.shape(), std::move(out), {y}, [ny, np, per](Node& self) {
    auto gy = ny->grad_buffer();
    for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += self.grad[i] * np->value[i % per];
  });
}

}  // namespace ops
}  // namespace opforge
