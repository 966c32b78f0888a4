#include <cmath>
#include <cstring>
#include <numbers>
#include <set>

#include "doctest.h"
#include "opforge/datasets.hpp"
#include "opforge/error.hpp"
#include "testutil.hpp"

using namespace opforge;
using std::numbers::pi;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

GenSpec small(const std::string& problem, std::size_t res, std::size_t ntr = 6) {
  GenSpec s;
  s.problem = problem;
  s.resolution = res;
  s.n_train = ntr;
  s.n_val = 2;
  s.n_test = 2;
  s.modes = 4;
  s.seed = 5;
  return s;
}

// Exact solution of the 2D five-point system with f = 1 at node (i, j),
// expanded in the discrete sine eigenbasis.
double dst_poisson_unit(std::size_t n, std::size_t i, std::size_t j) {
  double h = 1.0 / static_cast<double>(n);
  long double u = 0;
  std::vector<long double> c(n), lam(n);
  for (std::size_t k = 1; k < n; ++k) {
    long double s = 0;
    for (std::size_t m = 1; m < n; ++m) s += std::sin(pi * k * m / static_cast<double>(n));
    c[k] = 2.0L * s / n;
    long double sk = std::sin(pi * k / (2.0 * n));
    lam[k] = 4.0L * sk * sk / (h * h);
  }
  for (std::size_t k = 1; k < n; ++k)
    for (std::size_t l = 1; l < n; ++l)
      u += c[k] * c[l] / (lam[k] + lam[l]) * std::sin(pi * k * i / static_cast<double>(n)) *
           std::sin(pi * l * j / static_cast<double>(n));
  return static_cast<double>(u);
}

}  // namespace

TEST_CASE("GRF kernel and samples") {
  GrfSpec spec;
  spec.n = 64;
  auto K = grf_kernel_1d(spec);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(K[i * 64 + i] == 0.1);
    for (std::size_t j = 0; j < 64; ++j) CHECK(K[i * 64 + j] == K[j * 64 + i]);
  }
  CHECK(K[1] == doctest::Approx(0.1 * std::exp(-1.0 / (64.0 * 64.0) / (2 * 0.01))).epsilon(1e-14));

  spec.seed = 42;
  auto draws = grf_sample(spec, 1000);
  double bound = 3.0 * std::sqrt(0.1 / 1000.0);
  for (std::size_t node : {0u, 17u, 40u, 63u}) {
    double mean = 0, var = 0;
    for (auto& d : draws) mean += d[node];
    mean /= 1000;
    for (auto& d : draws) var += (d[node] - mean) * (d[node] - mean);
    var /= 999;
    CHECK(std::abs(mean) <= bound);
    CHECK(var == doctest::Approx(0.1).epsilon(0.15));
  }
  auto again = grf_sample(spec, 1000);
  for (std::size_t s = 0; s < 1000; ++s) REQUIRE(same_bits(draws[s], again[s]));

  spec.dims = 2;
  spec.n = 16;
  auto d2 = grf_sample(spec, 2);
  CHECK(d2[0].size() == 256);
  spec.n = 65;
  CHECK_THROWS_AS(grf_sample(spec, 1), ArgumentError);
}

TEST_CASE("psi map") {
  CHECK(psi_value(0.5) == 12.0);
  CHECK(psi_value(-0.5) == 3.0);
  CHECK(psi_value(0.0) == 3.0);
  std::vector<double> v{1e-300, -1e-300, 2.0};
  CHECK(psi_map(v) == std::vector<double>{12.0, 3.0, 12.0});
}

TEST_CASE("poisson solver") {
  kernels::GridGeom g{2, 64, 1.0 / 64};
  auto zero = solve_poisson_fd(g, std::vector<double>(g.points(), 0.0));
  for (double v : zero) CHECK(v == 0.0);

  std::vector<double> f(g.points()), exact(g.points());
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      f[i * 64 + j] = std::sin(pi * i / 64.0) * std::sin(pi * j / 64.0);
      exact[i * 64 + j] = f[i * 64 + j] / (2 * pi * pi);
    }
  CgInfo info;
  auto u = solve_poisson_fd(g, f, &info);
  CHECK(max_abs_diff(u, exact) <= 1e-3);
  CHECK(info.residual <= 1e-10);

  // f = 1: fine-grid oracle at h = 1/512, frozen.
  double fine = dst_poisson_unit(512, 256, 256);
  CHECK(fine == doctest::Approx(0.0737).epsilon(5e-4));
  auto u1 = solve_poisson_fd(g, std::vector<double>(g.points(), 1.0));
  CHECK(std::abs(u1[32 * 64 + 32] - dst_poisson_unit(64, 32, 32)) <= 1e-10);
  CHECK(std::abs(u1[32 * 64 + 32] - fine) <= 1e-4);

  kernels::GridGeom g1{1, 32, 1.0 / 32};
  std::vector<double> f1(32, 1.0);
  auto v1 = solve_poisson_fd(g1, f1);
  for (std::size_t i = 0; i < 32; ++i) {
    double x = i / 32.0;
    CHECK(v1[i] == doctest::Approx(0.5 * x * (1 - x)).epsilon(1e-10));  // exact for quadratics
  }
}

TEST_CASE("darcy solver") {
  kernels::GridGeom g{2, 32, 1.0 / 32};
  std::vector<double> f(g.points());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::cos(0.3 * i) + 0.5;
  auto up = solve_poisson_fd(g, f);
  auto ud = solve_darcy_fd(g, std::vector<double>(g.points(), 1.0), f);
  CHECK(max_abs_diff(up, ud) <= 1e-9);

  auto u4 = solve_darcy_fd(g, std::vector<double>(g.points(), 4.0), f);
  for (std::size_t i = 0; i < u4.size(); ++i) CHECK(std::abs(4.0 * u4[i] - ud[i]) <= 1e-9);

  std::vector<double> bad(g.points(), 1.0);
  bad[7] = 0.0;
  CHECK_THROWS_AS(solve_darcy_fd(g, bad, f), DomainError);
  bad[7] = -1.0;
  CHECK_THROWS_AS(solve_darcy_fd(g, bad, f), DomainError);
}

TEST_CASE("darcy self-convergence against a fine grid") {
  // Continuous field: bilinear interpolation of a 32x32 GRF draw, so psi of it
  // can be sampled on any grid and agrees on shared nodes.
  const std::size_t nc = 32, nf = 128;
  auto grf = grf_sample(GrfSpec{0.1, 0.1, nc, 2, 3}, 1)[0];
  auto field = [&](double x, double y) {
    double sx = std::min(x * nc, nc - 1.0), sy = std::min(y * nc, nc - 1.0);
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(sx), nc - 2);
    std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(sy), nc - 2);
    double tx = sx - i, ty = sy - j;
    auto at = [&](std::size_t a, std::size_t b) { return grf[a * nc + b]; };
    return (1 - tx) * ((1 - ty) * at(i, j) + ty * at(i, j + 1)) + tx * ((1 - ty) * at(i + 1, j) + ty * at(i + 1, j + 1));
  };
  auto solve = [&](std::size_t n) {
    kernels::GridGeom g{2, n, 1.0 / n};
    std::vector<double> a(g.points());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a[i * n + j] = psi_value(field(double(i) / n, double(j) / n));
    return solve_darcy_fd(g, a, std::vector<double>(g.points(), 1.0));
  };
  auto uc = solve(nc), uf = solve(nf);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = 0; j < nc; ++j) {
      double r = uf[(4 * i) * nf + 4 * j];
      num += (uc[i * nc + j] - r) * (uc[i * nc + j] - r);
      den += r * r;
    }
  double rel = std::sqrt(num / den);
  MESSAGE("darcy coarse vs fine relative L2: " << rel);
  CHECK(rel <= 0.05);
}

TEST_CASE("transport exact solution") {
  const std::size_t n = 32;
  std::vector<double> f0(n), shifted(n);
  for (std::size_t j = 0; j < n; ++j) {
    f0[j] = std::sin(2 * pi * j / n);
    shifted[j] = std::sin(2 * pi * (j / double(n) - 0.2));
  }
  CHECK(max_abs_diff(transport_exact(f0, 1, n, {0.0}, 1.0), f0) <= 1e-12);
  CHECK(max_abs_diff(transport_exact(f0, 1, n, {0.2}, 1.0), shifted) <= 1e-12);
  CHECK(max_abs_diff(transport_exact(f0, 1, n, {0.5}, 2.0), f0) <= 1e-12);

  // 2D: shift by a whole number of cells is a roll.
  std::vector<double> g0(n * n);
  for (std::size_t i = 0; i < g0.size(); ++i) g0[i] = std::cos(2 * pi * (i / n) / n) * std::sin(4 * pi * (i % n) / n);
  auto rolled = transport_exact(g0, 2, n, {3.0 / n, 5.0 / n}, 1.0);
  double err = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      err = std::max(err, std::abs(rolled[i * n + j] - g0[((i + n - 3) % n) * n + (j + n - 5) % n]));
  CHECK(err <= 1e-12);
}

TEST_CASE("generated pairs satisfy the discrete equations") {
  for (const char* problem : {"poisson1d", "poisson2d", "darcy2d"}) {
    CAPTURE(problem);
    auto ds = generate_dataset(small(problem, 16));
    kernels::GridGeom g{ds.dims(), 16, 1.0 / 16};
    std::size_t P = ds.points();
    double worst = 0;
    for (std::size_t s = 0; s < ds.count(); ++s) {
      const double* a = ds.inputs.data() + s * P;
      const double* u = ds.outputs.data() + s * P;
      std::vector<double> Au(P);
      bool darcy = std::string(problem) == "darcy2d";
      if (darcy)
        kernels::darcy_apply(g, a, u, Au.data());
      else
        kernels::neg_laplacian(g, u, Au.data());
      for (std::size_t p = 0; p < P; ++p) {
        bool interior = ds.dims() == 1 ? p % 16 != 0 : (p / 16 != 0 && p % 16 != 0);
        if (!interior) {
          CHECK(u[p] == 0.0);
          continue;
        }
        worst = std::max(worst, std::abs(Au[p] - (darcy ? 1.0 : a[p])));
      }
      if (darcy)
        for (std::size_t p = 0; p < P; ++p) REQUIRE((a[p] == 3.0 || a[p] == 12.0));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("generators are deterministic and resolution consistent") {
  for (const char* problem : {"poisson1d", "poisson2d", "darcy2d", "transport1d", "transport2d"}) {
    CAPTURE(problem);
    auto a = generate_dataset(small(problem, 16)), b = generate_dataset(small(problem, 16));
    CHECK(same_bits(a.inputs, b.inputs));
    CHECK(same_bits(a.outputs, b.outputs));
    GenSpec other = small(problem, 16);
    other.seed = 6;
    CHECK(max_abs_diff(generate_dataset(other).inputs, a.inputs) > 0.0);
  }
  for (const char* problem : {"poisson1d", "transport1d", "transport2d"}) {
    CAPTURE(problem);
    auto coarse = generate_dataset(small(problem, 16));
    auto fine = subsample(generate_dataset(small(problem, 32)), 16);
    CHECK(max_abs_diff(coarse.inputs, fine.inputs) <= 1e-12);
  }
  auto t = generate_dataset(small("transport1d", 16));
  CHECK(t.provenance.at("generator") == "transport1d");
  CHECK_THROWS_AS(generate_dataset(small("heat1d", 16)), ConfigError);
  GenSpec wide = small("transport1d", 16);
  wide.modes = 8;
  CHECK_THROWS_AS(generate_dataset(wide), ConfigError);
}

TEST_CASE("normalization") {
  auto ds = generate_dataset(small("poisson1d", 16, 10));
  Normalization n = ds.norm;
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < ds.n_train * 16; ++i) {
    lo = std::min(lo, ds.outputs[i]);
    hi = std::max(hi, ds.outputs[i]);
  }
  CHECK(n.out_min[0] == lo);
  CHECK(n.out_max[0] == hi);
  // Held-out samples do not move the constants.
  OperatorDataset edited = ds;
  edited.outputs.back() = 1e6;
  CHECK(compute_normalization(edited).out_max[0] == hi);

  auto z = normalize_values(ds.outputs, n.out_min, n.out_max);
  for (std::size_t i = 0; i < ds.n_train * 16; ++i) CHECK((z[i] >= 0.0 && z[i] <= 1.0));
  CHECK(max_abs_diff(denormalize_values(z, n.out_min, n.out_max), ds.outputs) <= 1e-12);
  std::vector<double> flat(4, 2.0);
  CHECK(max_abs_diff(denormalize_values(normalize_values(flat, {2.0}, {2.0}), {2.0}, {2.0}), flat) == 0.0);
}

TEST_CASE("dataset files round trip bit-exactly") {
  testutil::TempDir dir("ds");
  for (const char* problem : {"poisson2d", "transport1d"}) {
    auto ds = generate_dataset(small(problem, 16));
    save_dataset(ds, dir / problem);
    auto back = load_dataset(dir / problem);
    CHECK(back.spatial == ds.spatial);
    CHECK(back.n_train == ds.n_train);
    CHECK(back.n_val == ds.n_val);
    CHECK(back.n_test == ds.n_test);
    CHECK(same_bits(back.inputs, ds.inputs));
    CHECK(same_bits(back.outputs, ds.outputs));
    CHECK(same_bits(back.norm.out_max, ds.norm.out_max));
    CHECK(back.provenance == ds.provenance);
    CHECK(std::filesystem::file_size(dir / problem / "data.bin") == (ds.inputs.size() + ds.outputs.size()) * 8);
  }
  CHECK_THROWS_AS(load_dataset(dir / "missing"), NotFoundError);
  std::filesystem::create_directories(dir / "broken");
  testutil::write_file(dir / "broken" / "manifest.json", "{not json");
  CHECK_THROWS_AS(load_dataset(dir / "broken"), DataError);
  auto ds = generate_dataset(small("poisson1d", 16));
  save_dataset(ds, dir / "short");
  std::filesystem::resize_file(dir / "short" / "data.bin", 64);
  CHECK_THROWS_AS(load_dataset(dir / "short"), DataError);
}

TEST_CASE("splits and batches") {
  auto ds = generate_dataset(small("poisson1d", 16));
  CHECK(ds.split_begin(Split::Validation) == 6);
  CHECK(ds.split_begin(Split::Test) == 8);
  Tensor x = ds.split_inputs(Split::Validation);
  CHECK(x.shape() == Shape{2, 16, 1});
  CHECK(x.values()[0] == ds.inputs[6 * 16]);

  auto one = concat_datasets({std::make_shared<const OperatorDataset>(ds)});
  auto b = make_batches(one, Split::Train, 4, nullptr);
  REQUIRE(b.size() == 2);
  CHECK(b[0].indices == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(b[1].indices == std::vector<std::size_t>{4, 5});
  CHECK_THROWS_AS(make_batches(one, Split::Train, 0, nullptr), ArgumentError);
}

TEST_CASE("concatenation") {
  auto a = std::make_shared<const OperatorDataset>(generate_dataset(small("poisson1d", 16, 100)));
  auto b = std::make_shared<const OperatorDataset>(generate_dataset(small("poisson1d", 32, 150)));
  auto c = concat_datasets({a, b});
  CHECK(c.split_size(Split::Train) == 250);
  std::mt19937_64 rng(1);
  auto batches = make_batches(c, Split::Train, 16, &rng);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::size_t total = 0;
  bool mixed_order = false;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const auto& bt = batches[i];
    auto src = c.sources[bt.source];
    Tensor x = src->input_batch(bt.indices);
    CHECK(x.dim(1) == src->resolution());
    for (auto idx : bt.indices) {
      CHECK(idx < src->n_train);
      seen.insert({bt.source, idx});
    }
    total += bt.indices.size();
    if (i > 0 && bt.source != batches[i - 1].source) mixed_order = true;
  }
  CHECK(total == 250);
  CHECK(seen.size() == 250);
  CHECK(mixed_order);

  Normalization n = c.normalization();
  CHECK(n.out_max[0] == std::max(a->norm.out_max[0], b->norm.out_max[0]));
  CHECK(n.in_min[0] == std::min(a->norm.in_min[0], b->norm.in_min[0]));

  OperatorDataset two = *a;
  two.in_channels = 2;
  two.inputs.resize(two.inputs.size() * 2);
  CHECK_THROWS_AS(concat_datasets({a, std::make_shared<const OperatorDataset>(two)}), ContractError);
}

TEST_CASE("multi-resolution loading") {
  auto base = std::make_shared<const OperatorDataset>(generate_dataset(small("poisson2d", 64)));
  auto same = load_multiresolution(base, {64});
  REQUIRE(same.sources.size() == 1);
  CHECK(same_bits(same.sources[0]->inputs, base->inputs));

  auto c = load_multiresolution(base, {64, 16}, 9);
  REQUIRE(c.sources.size() == 2);
  const auto& low = *c.sources[1];
  CHECK(low.spatial == Shape{16, 16});
  for (std::size_t s = 0; s < base->count(); ++s)
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 16; ++j)
        REQUIRE(low.outputs[s * 256 + i * 16 + j] == base->outputs[s * 4096 + (4 * i) * 64 + 4 * j]);

  try {
    load_multiresolution(base, {16}, 10);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("at most 9") != std::string::npos);
  }
  CHECK_THROWS_AS(load_multiresolution(base, {48}), DivisibilityError);
  CHECK_THROWS_AS(subsample(*base, 48), DivisibilityError);
}
