#include <cstring>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "opforge/cno.hpp"
#include "opforge/fno.hpp"
#include "opforge/kernels.hpp"

using namespace opforge;
namespace k = opforge::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("linear kernels agree bitwise") {
  const std::size_t M = 257, cin = 7, cout = 5;
  auto x = rand_vec(M * cin, 1), W = rand_vec(cin * cout, 2), b = rand_vec(cout, 3), gy = rand_vec(M * cout, 4);
  std::vector<double> ys(M * cout), yp(M * cout);
  k::serial::linear_fwd(x.data(), W.data(), b.data(), ys.data(), M, cin, cout);
  k::parallel::linear_fwd(x.data(), W.data(), b.data(), yp.data(), M, cin, cout);
  CHECK(same_bits(ys, yp));
  std::vector<double> gs(M * cin, 0.5), gp(M * cin, 0.5);
  k::serial::linear_bwd_input(gy.data(), W.data(), gs.data(), M, cin, cout);
  k::parallel::linear_bwd_input(gy.data(), W.data(), gp.data(), M, cin, cout);
  CHECK(same_bits(gs, gp));
  std::vector<double> ws(cin * cout, 0.1), wp(cin * cout, 0.1);
  k::serial::linear_bwd_weight(x.data(), gy.data(), ws.data(), M, cin, cout);
  k::parallel::linear_bwd_weight(x.data(), gy.data(), wp.data(), M, cin, cout);
  CHECK(same_bits(ws, wp));
}

TEST_CASE("axis maps agree bitwise") {
  const std::size_t rows = 9, cols = 12, outer = 6, inner = 5;
  auto A = rand_vec(rows * cols, 5), x = rand_vec(outer * cols * inner, 6), xt = rand_vec(outer * rows * inner, 7);
  for (bool acc : {false, true}) {
    std::vector<double> ys(outer * rows * inner, 1.0), yp = ys;
    k::serial::axis_map(A.data(), rows, cols, x.data(), ys.data(), outer, inner, acc);
    k::parallel::axis_map(A.data(), rows, cols, x.data(), yp.data(), outer, inner, acc);
    CHECK(same_bits(ys, yp));
    std::vector<double> ts(outer * cols * inner, 1.0), tp = ts;
    k::serial::axis_map_t(A.data(), rows, cols, xt.data(), ts.data(), outer, inner, acc);
    k::parallel::axis_map_t(A.data(), rows, cols, xt.data(), tp.data(), outer, inner, acc);
    CHECK(same_bits(ts, tp));
  }
}

TEST_CASE("mode mixing kernels agree bitwise") {
  const std::size_t B = 3, modes = 17, cin = 4, cout = 6;
  auto xr = rand_vec(B * modes * cin, 8), xi = rand_vec(B * modes * cin, 9), W = rand_vec(modes * cin * cout * 2, 10);
  auto gyr = rand_vec(B * modes * cout, 11), gyi = rand_vec(B * modes * cout, 12);
  std::vector<double> yrs(B * modes * cout), yis(B * modes * cout), yrp(yrs.size()), yip(yis.size());
  k::serial::mode_mix_fwd(xr.data(), xi.data(), W.data(), yrs.data(), yis.data(), B, modes, cin, cout);
  k::parallel::mode_mix_fwd(xr.data(), xi.data(), W.data(), yrp.data(), yip.data(), B, modes, cin, cout);
  CHECK(same_bits(yrs, yrp));
  CHECK(same_bits(yis, yip));
  std::vector<double> grs(xr.size(), 0.0), gis(xr.size(), 0.0), grp(xr.size(), 0.0), gip(xr.size(), 0.0);
  k::serial::mode_mix_bwd_input(gyr.data(), gyi.data(), W.data(), grs.data(), gis.data(), B, modes, cin, cout);
  k::parallel::mode_mix_bwd_input(gyr.data(), gyi.data(), W.data(), grp.data(), gip.data(), B, modes, cin, cout);
  CHECK(same_bits(grs, grp));
  CHECK(same_bits(gis, gip));
  std::vector<double> gws(W.size(), 0.0), gwp(W.size(), 0.0);
  k::serial::mode_mix_bwd_weight(xr.data(), xi.data(), gyr.data(), gyi.data(), gws.data(), B, modes, cin, cout);
  k::parallel::mode_mix_bwd_weight(xr.data(), xi.data(), gyr.data(), gyi.data(), gwp.data(), B, modes, cin, cout);
  CHECK(same_bits(gws, gwp));
}

TEST_CASE("convolution kernels agree bitwise") {
  for (std::size_t dims : {1u, 2u})
    for (bool periodic : {true, false}) {
      k::ConvGeom g;
      g.batch = 2;
      g.dims = dims;
      g.n0 = 11;
      g.n1 = dims == 2 ? 9 : 1;
      g.k = 5;
      g.cin = 3;
      g.cout = 4;
      g.periodic = periodic;
      auto x = rand_vec(g.batch * g.points() * g.cin, 13), W = rand_vec(g.taps() * g.cin * g.cout, 14);
      auto b = rand_vec(g.cout, 15), gy = rand_vec(g.batch * g.points() * g.cout, 16);
      std::vector<double> ys(gy.size()), yp(gy.size());
      k::serial::conv_fwd(g, x.data(), W.data(), b.data(), ys.data());
      k::parallel::conv_fwd(g, x.data(), W.data(), b.data(), yp.data());
      CHECK(same_bits(ys, yp));
      std::vector<double> gxs(x.size(), 0.0), gxp(x.size(), 0.0);
      k::serial::conv_bwd_input(g, gy.data(), W.data(), gxs.data());
      k::parallel::conv_bwd_input(g, gy.data(), W.data(), gxp.data());
      CHECK(same_bits(gxs, gxp));
      std::vector<double> gws(W.size(), 0.0), gwp(W.size(), 0.0);
      k::serial::conv_bwd_weight(g, x.data(), gy.data(), gws.data());
      k::parallel::conv_bwd_weight(g, x.data(), gy.data(), gwp.data());
      CHECK(same_bits(gws, gwp));
    }
}

TEST_CASE("stencil kernels agree bitwise") {
  for (std::size_t dims : {1u, 2u}) {
    k::GridGeom g{dims, 24, 1.0 / 24};
    auto u = rand_vec(g.points(), 17), a = rand_vec(g.points(), 18);
    for (auto& v : a) v = 1.5 + v;
    std::vector<double> ls(g.points()), lp(g.points()), ds(g.points()), dp(g.points());
    k::serial::neg_laplacian(g, u.data(), ls.data());
    k::parallel::neg_laplacian(g, u.data(), lp.data());
    CHECK(same_bits(ls, lp));
    k::serial::darcy_apply(g, a.data(), u.data(), ds.data());
    k::parallel::darcy_apply(g, a.data(), u.data(), dp.data());
    CHECK(same_bits(ds, dp));
  }
}

TEST_CASE("backend switch reproduces whole-model passes bitwise") {
  FnoConfig fc;
  fc.problem_dim = 2;
  fc.width = 6;
  fc.n_layers = 2;
  fc.modes = 3;
  CnoConfig cc;
  cc.problem_dim = 2;
  cc.in_size = 16;
  cc.n_layers = 2;
  cc.n_res_neck = 1;
  cc.n_res = 1;
  cc.channel_multiplier = 3;
  cc.kernel_size = 3;
  Tensor x = gradcheck::uniform_tensor({2, 16, 16, 1}, 19, false);

  auto run = [&](k::Backend backend, Model& m) {
    k::BackendScope scope(backend);
    for (auto& p : m.parameters()) p.value.zero_grad();
    Tensor y = m.forward(x);
    backward(gradcheck::project(y, 20));
    std::vector<double> out(y.values().begin(), y.values().end());
    for (auto& p : m.parameters()) out.insert(out.end(), p.value.grad().begin(), p.value.grad().end());
    return out;
  };
  FnoModel f(fc, 1);
  CHECK(same_bits(run(k::Backend::Serial, f), run(k::Backend::Parallel, f)));
  CnoModel c(cc, 1);
  CHECK(same_bits(run(k::Backend::Serial, c), run(k::Backend::Parallel, c)));
  CHECK(k::backend() == k::Backend::Parallel);
  {
    k::BackendScope s(k::Backend::Serial);
    CHECK(k::backend() == k::Backend::Serial);
  }
  CHECK(k::backend() == k::Backend::Parallel);
}
