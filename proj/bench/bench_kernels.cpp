// Serial reference kernels against their OpenMP versions.
// Run with OMP_NUM_THREADS set to the core count of interest.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

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

template <bool Par>
void BM_linear_fwd(benchmark::State& st) {
  const std::size_t M = static_cast<std::size_t>(st.range(0)), cin = 64, cout = 64;
  auto x = rand_vec(M * cin, 1), W = rand_vec(cin * cout, 2), b = rand_vec(cout, 3);
  std::vector<double> y(M * cout);
  for (auto _ : st) {
    if (Par)
      k::parallel::linear_fwd(x.data(), W.data(), b.data(), y.data(), M, cin, cout);
    else
      k::serial::linear_fwd(x.data(), W.data(), b.data(), y.data(), M, cin, cout);
    benchmark::DoNotOptimize(y.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(M));
}

template <bool Par>
void BM_mode_mix_fwd(benchmark::State& st) {
  const std::size_t batch = 8, modes = static_cast<std::size_t>(st.range(0)), c = 32;
  auto xr = rand_vec(batch * modes * c, 4), xi = rand_vec(batch * modes * c, 5), W = rand_vec(modes * c * c * 2, 6);
  std::vector<double> yr(batch * modes * c), yi(batch * modes * c);
  for (auto _ : st) {
    if (Par)
      k::parallel::mode_mix_fwd(xr.data(), xi.data(), W.data(), yr.data(), yi.data(), batch, modes, c, c);
    else
      k::serial::mode_mix_fwd(xr.data(), xi.data(), W.data(), yr.data(), yi.data(), batch, modes, c, c);
    benchmark::DoNotOptimize(yr.data());
  }
}

template <bool Par>
void BM_conv_fwd(benchmark::State& st) {
  k::ConvGeom g;
  g.batch = 4;
  g.dims = 2;
  g.n0 = g.n1 = static_cast<std::size_t>(st.range(0));
  g.k = 3;
  g.cin = g.cout = 16;
  auto x = rand_vec(g.batch * g.points() * g.cin, 7), W = rand_vec(g.taps() * g.cin * g.cout, 8),
       b = rand_vec(g.cout, 9);
  std::vector<double> y(g.batch * g.points() * g.cout);
  for (auto _ : st) {
    if (Par)
      k::parallel::conv_fwd(g, x.data(), W.data(), b.data(), y.data());
    else
      k::serial::conv_fwd(g, x.data(), W.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Par>
void BM_darcy_apply(benchmark::State& st) {
  k::GridGeom g{2, static_cast<std::size_t>(st.range(0)), 1.0 / static_cast<double>(st.range(0))};
  auto a = rand_vec(g.points(), 10), u = rand_vec(g.points(), 11);
  for (auto& v : a) v = 3.0 + 9.0 * (v > 0);
  std::vector<double> out(g.points());
  for (auto _ : st) {
    if (Par)
      k::parallel::darcy_apply(g, a.data(), u.data(), out.data());
    else
      k::serial::darcy_apply(g, a.data(), u.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
}

template <k::Backend B>
void BM_fno_forward(benchmark::State& st) {
  FnoConfig c;
  c.problem_dim = 2;
  c.width = 32;
  c.n_layers = 4;
  c.modes = 12;
  FnoModel m(c, 1);
  const std::size_t n = static_cast<std::size_t>(st.range(0));
  Tensor x = Tensor::from({4, n, n, 1}, rand_vec(4 * n * n, 12));
  k::BackendScope scope(B);
  NoGradGuard guard;
  for (auto _ : st) benchmark::DoNotOptimize(m.forward(x));
}

}  // namespace

BENCHMARK(BM_linear_fwd<false>)->Arg(4096)->Arg(65536);
BENCHMARK(BM_linear_fwd<true>)->Arg(4096)->Arg(65536);
BENCHMARK(BM_mode_mix_fwd<false>)->Arg(144)->Arg(1024);
BENCHMARK(BM_mode_mix_fwd<true>)->Arg(144)->Arg(1024);
BENCHMARK(BM_conv_fwd<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_conv_fwd<true>)->Arg(32)->Arg(64);
BENCHMARK(BM_darcy_apply<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_darcy_apply<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_fno_forward<k::Backend::Serial>)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fno_forward<k::Backend::Parallel>)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
