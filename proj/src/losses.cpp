#include "opforge/losses.hpp"

#include <cmath>

#include "opforge/error.hpp"
#include "opforge/ops.hpp"

namespace opforge {

using detail::make_result;
using detail::Node;

namespace {

void check_pair(const Tensor& pred, const Tensor& target, const char* what) {
  if (pred.shape() != target.shape())
    throw ShapeError(std::string(what) + ": prediction " + shape_str(pred.shape()) + " and target " +
                     shape_str(target.shape()) + " differ");
  if (pred.rank() < 2) throw ShapeError(std::string(what) + " expects a leading batch axis");
}

double pnorm(const double* v, std::size_t n, double p) {
  double acc = 0.0;
  if (p == 2.0) {
    for (std::size_t i = 0; i < n; ++i) acc += v[i] * v[i];
    return std::sqrt(acc);
  }
  if (p == 1.0) {
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(v[i]);
    return acc;
  }
  for (std::size_t i = 0; i < n; ++i) acc += std::pow(std::abs(v[i]), p);
  return std::pow(acc, 1.0 / p);
}

// d||e||_p / de_i given the norm value.
double pnorm_grad(double e, double norm, double p) {
  if (norm == 0.0 || e == 0.0) return 0.0;
  double s = e > 0.0 ? 1.0 : -1.0;
  if (p == 1.0) return s;
  if (p == 2.0) return e / norm;
  return s * std::pow(std::abs(e) / norm, p - 1.0);
}

LossValue finish(std::vector<double> per_sample, Tensor total) { return LossValue{std::move(total), std::move(per_sample)}; }

// A field [B, n0, (n1,) C] viewed along one spatial axis as outer x n x inner.
struct AxisView {
  std::size_t outer, n, inner;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

void diff_apply(const double* x, double* out, AxisView v, double h) {
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.n; ++i)
      for (std::size_t q = 0; q < v.inner; ++q) {
        auto at = [&](std::size_t j) { return x[(o * v.n + j) * v.inner + q]; };
        double d;
        if (i == 0)
          d = (at(1) - at(0)) / h;
        else if (i + 1 == v.n)
          d = (at(v.n - 1) - at(v.n - 2)) / h;
        else
          d = (at(i + 1) - at(i - 1)) / (2.0 * h);
        out[(o * v.n + i) * v.inner + q] = d;
      }
}

// out += D^T g
void diff_apply_t(const double* g, double* out, AxisView v, double h) {
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.n; ++i)
      for (std::size_t q = 0; q < v.inner; ++q) {
        auto idx = [&](std::size_t j) { return (o * v.n + j) * v.inner + q; };
        double gi = g[idx(i)];
        if (i == 0) {
          out[idx(1)] += gi / h;
          out[idx(0)] -= gi / h;
        } else if (i + 1 == v.n) {
          out[idx(v.n - 1)] += gi / h;
          out[idx(v.n - 2)] -= gi / h;
        } else {
          out[idx(i + 1)] += gi / (2.0 * h);
          out[idx(i - 1)] -= gi / (2.0 * h);
        }
      }
}

}  // namespace

LossValue lp_relative(const Tensor& pred, const Tensor& target, double p) {
  check_pair(pred, target, "lp_relative");
  if (!(p >= 1.0) || !std::isfinite(p)) throw ArgumentError("lp_relative: p must be a finite value >= 1");
  std::size_t B = pred.dim(0), M = pred.size() / B;
  auto pv = pred.values(), tv = target.values();
  std::vector<double> err(pred.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = pv[i] - tv[i];
  std::vector<double> num(B), den(B), rel(B);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    den[b] = pnorm(tv.data() + b * M, M, p);
    if (den[b] == 0.0)
      throw DegenerateSampleError(b, "lp_relative: target sample " + std::to_string(b) + " has zero norm");
    num[b] = pnorm(err.data() + b * M, M, p);
    rel[b] = num[b] / den[b];
    total += rel[b];
  }
  auto np = pred.node();
  Tensor t = make_result({1}, {total}, {pred}, [np, err = std::move(err), num, den, B, M, p](Node& self) {
    auto g = np->grad_buffer();
    for (std::size_t b = 0; b < B; ++b) {
      double s = self.grad[0] / den[b];
      for (std::size_t j = b * M; j < (b + 1) * M; ++j) g[j] += s * pnorm_grad(err[j], num[b], p);
    }
  });
  return finish(std::move(rel), std::move(t));
}

LossValue h1_relative(const Tensor& pred, const Tensor& target, double h) {
  check_pair(pred, target, "h1_relative");
  if (pred.rank() < 3) throw ShapeError("h1_relative expects [batch, spatial..., channels]");
  if (!(h > 0.0)) throw ArgumentError("h1_relative: grid spacing must be positive");
  const Shape& s = pred.shape();
  std::size_t naxes = s.size() - 2;
  for (std::size_t a = 0; a < naxes; ++a)
    if (s[1 + a] < 3)
      throw ResolutionError("h1_relative needs at least 3 points per axis, got " + shape_str(s));
  std::size_t B = s[0], M = pred.size() / B, N = pred.size();
  auto pv = pred.values(), tv = target.values();
  std::vector<double> err(N);
  for (std::size_t i = 0; i < N; ++i) err[i] = pv[i] - tv[i];

  std::vector<std::vector<double>> derr(naxes, std::vector<double>(N)), dtgt(naxes, std::vector<double>(N));
  for (std::size_t a = 0; a < naxes; ++a) {
    diff_apply(err.data(), derr[a].data(), axis_view(s, 1 + a), h);
    diff_apply(tv.data(), dtgt[a].data(), axis_view(s, 1 + a), h);
  }
  std::vector<double> num(B), den(B), rel(B);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double qe = 0.0, qt = 0.0;
    for (std::size_t j = b * M; j < (b + 1) * M; ++j) {
      qe += err[j] * err[j];
      qt += tv[j] * tv[j];
      for (std::size_t a = 0; a < naxes; ++a) {
        qe += derr[a][j] * derr[a][j];
        qt += dtgt[a][j] * dtgt[a][j];
      }
    }
    if (qt == 0.0) throw DegenerateSampleError(b, "h1_relative: target sample " + std::to_string(b) + " has zero norm");
    num[b] = std::sqrt(qe);
    den[b] = std::sqrt(qt);
    rel[b] = num[b] / den[b];
    total += rel[b];
  }
  auto np = pred.node();
  Tensor t = make_result({1}, {total}, {pred},
                         [np, s, h, B, M, err = std::move(err), derr = std::move(derr), num, den](Node& self) {
                           std::vector<double> q = err;
                           for (std::size_t a = 0; a < derr.size(); ++a)
                             diff_apply_t(derr[a].data(), q.data(), axis_view(s, 1 + a), h);
                           auto g = np->grad_buffer();
                           for (std::size_t b = 0; b < B; ++b) {
                             if (num[b] == 0.0) continue;
                             double c = self.grad[0] / (num[b] * den[b]);
                             for (std::size_t j = b * M; j < (b + 1) * M; ++j) g[j] += c * q[j];
                           }
                         });
  return finish(std::move(rel), std::move(t));
}

LossValue poisson_residual_fd(const Tensor& u, const Tensor& f, double alpha, double p, double h) {
  check_pair(u, f, "poisson_residual_fd");
  if (u.rank() != 3 && u.rank() != 4) throw ShapeError("poisson_residual_fd expects [batch, n, (n,) channels]");
  if (!(p >= 1.0) || !std::isfinite(p)) throw ArgumentError("poisson_residual_fd: p must be a finite value >= 1");
  if (!(h > 0.0)) throw ArgumentError("poisson_residual_fd: grid spacing must be positive");
  const Shape& s = u.shape();
  std::size_t d = s.size() - 2;
  for (std::size_t a = 0; a < d; ++a)
    if (s[1 + a] < 5)
      throw ShapeError("poisson_residual_fd needs at least 3 interior points per axis, got " + shape_str(s));
  std::size_t B = s[0], n0 = s[1], n1 = d == 2 ? s[2] : 1, C = s.back();
  std::size_t i1lo = d == 2 ? 1 : 0, i1hi = d == 2 ? n1 - 1 : 1;
  std::size_t M = u.size() / B;
  double inv_h2 = 1.0 / (h * h);
  auto uv = u.values(), fv = f.values();
  auto idx = [=](std::size_t b, std::size_t i, std::size_t j, std::size_t c) { return ((b * n0 + i) * n1 + j) * C + c; };

  // Residual stored on the full grid, zero outside the interior.
  std::vector<double> r(u.size(), 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 1; i + 1 < n0; ++i)
      for (std::size_t j = i1lo; j < i1hi; ++j)
        for (std::size_t c = 0; c < C; ++c) {
          double lap = 2.0 * uv[idx(b, i, j, c)] - uv[idx(b, i - 1, j, c)] - uv[idx(b, i + 1, j, c)];
          if (d == 2) lap += 2.0 * uv[idx(b, i, j, c)] - uv[idx(b, i, j - 1, c)] - uv[idx(b, i, j + 1, c)];
          r[idx(b, i, j, c)] = lap * inv_h2 - fv[idx(b, i, j, c)];
        }
  std::vector<double> norm(B), per(B);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    norm[b] = pnorm(r.data() + b * M, M, p);
    per[b] = alpha * norm[b];
    total += per[b];
  }
  auto nu = u.node();
  Tensor t = make_result({1}, {total}, {u}, [=, r = std::move(r)](Node& self) {
    auto g = nu->grad_buffer();
    for (std::size_t b = 0; b < B; ++b) {
      double sc = self.grad[0] * alpha * inv_h2;
      if (sc == 0.0) continue;
      for (std::size_t i = 1; i + 1 < n0; ++i)
        for (std::size_t j = i1lo; j < i1hi; ++j)
          for (std::size_t c = 0; c < C; ++c) {
            double gr = sc * pnorm_grad(r[idx(b, i, j, c)], norm[b], p);
            if (gr == 0.0) continue;
            g[idx(b, i, j, c)] += 2.0 * static_cast<double>(d) * gr;
            g[idx(b, i - 1, j, c)] -= gr;
            g[idx(b, i + 1, j, c)] -= gr;
            if (d == 2) {
              g[idx(b, i, j - 1, c)] -= gr;
              g[idx(b, i, j + 1, c)] -= gr;
            }
          }
    }
  });
  return finish(std::move(per), std::move(t));
}

LossValue combined_loss(const LossValue& data, const LossValue& phys) {
  if (data.per_sample.size() != phys.per_sample.size())
    throw ContractError("combined_loss: data and physics terms cover different batches");
  std::vector<double> per(data.per_sample.size());
  for (std::size_t i = 0; i < per.size(); ++i) per[i] = data.per_sample[i] + phys.per_sample[i];
  return LossValue{ops::add(data.total, phys.total), std::move(per)};
}

}  // namespace opforge
