#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gradcheck.hpp"
#include "opforge/datasets.hpp"
#include "opforge/error.hpp"
#include "opforge/losses.hpp"

using namespace opforge;

namespace {

Tensor vec2(double a, double b, bool grad = false) { return Tensor::from({1, 2, 1}, {a, b}, grad); }

// Plain loop H1 norm for [B, n0, (n1,) 1] with one-sided ends.
double h1_oracle(const std::vector<double>& e, const std::vector<double>& u, std::size_t n0, std::size_t n1,
                 double h) {
  auto deriv = [&](const std::vector<double>& v, std::size_t i, std::size_t j, bool along0) {
    std::size_t n = along0 ? n0 : n1;
    std::size_t k = along0 ? i : j;
    auto at = [&](std::size_t q) { return along0 ? v[q * n1 + j] : v[i * n1 + q]; };
    if (k == 0) return (at(1) - at(0)) / h;
    if (k == n - 1) return (at(n - 1) - at(n - 2)) / h;
    return (at(k + 1) - at(k - 1)) / (2 * h);
  };
  long double qe = 0, qu = 0;
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      qe += e[i * n1 + j] * e[i * n1 + j];
      qu += u[i * n1 + j] * u[i * n1 + j];
      double de = deriv(e, i, j, true), du = deriv(u, i, j, true);
      qe += de * de;
      qu += du * du;
      if (n1 > 1) {
        de = deriv(e, i, j, false);
        du = deriv(u, i, j, false);
        qe += de * de;
        qu += du * du;
      }
    }
  return static_cast<double>(std::sqrt(qe / qu));
}

}  // namespace

TEST_CASE("lp_relative examples") {
  CHECK(lp_relative(vec2(2, 2), vec2(2, 2), 1).value() == 0.0);
  CHECK(lp_relative(vec2(1, 3), vec2(2, 2), 1).value() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(lp_relative(vec2(3, 0), vec2(3, 4), 2).value() == doctest::Approx(0.8).epsilon(1e-15));

  Tensor p = Tensor::from({2, 2, 1}, {1, 3, 3, 0}), t = Tensor::from({2, 2, 1}, {2, 2, 3, 4});
  LossValue l = lp_relative(p, t, 1);
  REQUIRE(l.per_sample.size() == 2);
  CHECK(l.per_sample[0] == doctest::Approx(0.5));
  CHECK(l.per_sample[1] == doctest::Approx(4.0 / 7.0));
  CHECK(l.value() == doctest::Approx(l.per_sample[0] + l.per_sample[1]).epsilon(1e-15));
}

TEST_CASE("lp_relative is scale invariant") {
  Tensor p = gradcheck::random_tensor({3, 16, 2}, 1, 1.0, false), t = gradcheck::random_tensor({3, 16, 2}, 2, 1.0, false);
  for (double pp : {1.0, 2.0, 3.5}) {
    double base = lp_relative(p, t, pp).value();
    for (double c : {-7.0, 1e-3, 250.0}) {
      Tensor ps = Tensor::from(p.shape(), std::vector<double>(p.values().begin(), p.values().end()));
      Tensor ts = Tensor::from(t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
      for (auto& v : ps.values_mut()) v *= c;
      for (auto& v : ts.values_mut()) v *= c;
      CHECK(std::abs(lp_relative(ps, ts, pp).value() - base) <= 1e-12);
    }
  }
}

TEST_CASE("lp_relative errors") {
  Tensor t = Tensor::from({2, 2, 1}, {1, 1, 0, 0});
  try {
    lp_relative(t, t, 2);
    FAIL("expected DegenerateSampleError");
  } catch (const DegenerateSampleError& e) {
    CHECK(e.sample == 1);
    CHECK(e.kind() == ErrorKind::Data);
  }
  CHECK_THROWS_AS(lp_relative(vec2(1, 2), Tensor::from({1, 3, 1}, {1, 2, 3}), 2), ShapeError);
  CHECK_THROWS_AS(lp_relative(vec2(1, 2), vec2(1, 2), 0.5), ArgumentError);
}

TEST_CASE("h1_relative examples and oracle") {
  Tensor t = gradcheck::random_tensor({2, 12, 1}, 3, 1.0, false);
  CHECK(h1_relative(t, t, 0.1).value() == 0.0);

  // Constant target shifted by c: only the value term survives.
  Tensor u = Tensor::from({1, 10, 1}, std::vector<double>(10, 2.0));
  Tensor v = Tensor::from({1, 10, 1}, std::vector<double>(10, 2.5));
  CHECK(h1_relative(v, u, 0.1).value() == doctest::Approx(lp_relative(v, u, 2).value()).epsilon(1e-14));

  for (auto dims : {1u, 2u}) {
    std::size_t n0 = 9, n1 = dims == 2 ? 7 : 1;
    Shape s = dims == 2 ? Shape{3, n0, n1, 1} : Shape{3, n0, 1};
    Tensor p = gradcheck::random_tensor(s, 4 + dims, 1.0, false), q = gradcheck::random_tensor(s, 6 + dims, 1.0, false);
    LossValue l = h1_relative(p, q, 0.125);
    std::size_t M = n0 * n1;
    double sum = 0;
    for (std::size_t b = 0; b < 3; ++b) {
      std::vector<double> e(M), uu(M);
      for (std::size_t j = 0; j < M; ++j) {
        e[j] = p.values()[b * M + j] - q.values()[b * M + j];
        uu[j] = q.values()[b * M + j];
      }
      double ref = h1_oracle(e, uu, n0, n1, 0.125);
      CHECK(std::abs(l.per_sample[b] - ref) <= 1e-12);
      sum += ref;
    }
    CHECK(std::abs(l.value() - sum) <= 1e-12);
  }
  CHECK_THROWS_AS(h1_relative(vec2(1, 2), vec2(1, 3), 0.1), ResolutionError);
}

TEST_CASE("poisson residual examples") {
  for (std::size_t dims : {1u, 2u}) {
    std::size_t n = dims == 1 ? 64 : 24;
    double h = 1.0 / n;
    kernels::GridGeom g{dims, n, h};
    std::vector<double> f(g.points());
    for (std::size_t i = 0; i < f.size(); ++i) {
      double x = static_cast<double>(i % n) * h, y = static_cast<double>(i / n) * h;
      f[i] = std::sin(std::numbers::pi * x) * (dims == 2 ? std::cos(3 * y) : 1.0) + x;
    }
    auto u = solve_poisson_fd(g, f);
    Shape s = dims == 1 ? Shape{1, n, 1} : Shape{1, n, n, 1};
    LossValue l = poisson_residual_fd(Tensor::from(s, u), Tensor::from(s, f), 1.0, 2.0, h);
    CHECK(l.value() <= 1e-10);
  }

  // 7x7 grid has a 5x5 interior; r = -f there.
  Tensor u = Tensor::from({1, 7, 7, 1}, std::vector<double>(49, 0.0));
  Tensor f = Tensor::from({1, 7, 7, 1}, std::vector<double>(49, 1.0));
  CHECK(poisson_residual_fd(u, f, 1.0, 2.0, 1.0 / 7).value() == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(poisson_residual_fd(u, f, 0.0, 2.0, 1.0 / 7).value() == 0.0);
  CHECK(poisson_residual_fd(u, f, 0.5, 1.0, 1.0 / 7).value() == doctest::Approx(12.5));
  CHECK_THROWS_AS(poisson_residual_fd(Tensor::from({1, 4, 1}, {0, 0, 0, 0}), Tensor::from({1, 4, 1}, {0, 0, 0, 0}),
                                      1, 2, 0.25),
                  ShapeError);
}

TEST_CASE("combined loss adds both terms") {
  Tensor p = gradcheck::random_tensor({2, 8, 1}, 9, 1.0, false), t = gradcheck::random_tensor({2, 8, 1}, 10, 1.0, false);
  LossValue data = lp_relative(p, t, 2);
  LossValue zero = poisson_residual_fd(p, t, 0.0, 2.0, 0.125);
  LossValue phys = poisson_residual_fd(p, t, 0.01, 2.0, 0.125);
  CHECK(combined_loss(data, zero).value() == data.value());
  LossValue zd = lp_relative(t, t, 2);
  CHECK(combined_loss(zd, phys).value() == phys.value());
  LossValue both = combined_loss(data, phys);
  CHECK(both.value() == data.value() + phys.value());
  for (std::size_t b = 0; b < 2; ++b) CHECK(both.per_sample[b] == data.per_sample[b] + phys.per_sample[b]);
  LossValue other = lp_relative(Tensor::from({1, 2, 1}, {1, 1}), Tensor::from({1, 2, 1}, {1, 2}), 2);
  CHECK_THROWS_AS(combined_loss(data, other), ContractError);
}

TEST_CASE("loss gradients match finite differences") {
  Tensor t1 = gradcheck::random_tensor({2, 10, 2}, 11, 1.0, false);
  Tensor t2 = gradcheck::random_tensor({2, 8, 6, 1}, 12, 1.0, false);
  for (double p : {1.0, 2.0, 3.0}) {
    Tensor x = gradcheck::random_tensor({2, 10, 2}, 13);
    auto r = gradcheck::check([&] { return lp_relative(x, t1, p).total; }, {x}, 60, 14);
    CHECK(r.worst <= 1e-5);
    CHECK(r.nontrivial >= 50);
  }
  {
    Tensor x = gradcheck::random_tensor({2, 8, 6, 1}, 15);
    auto r = gradcheck::check([&] { return h1_relative(x, t2, 0.2).total; }, {x}, 60, 16);
    CHECK(r.worst <= 1e-5);
    CHECK(r.nontrivial >= 50);
  }
  for (double p : {1.0, 2.0}) {
    Tensor x = gradcheck::random_tensor({2, 8, 6, 1}, 17);
    auto r = gradcheck::check([&] { return poisson_residual_fd(x, t2, 0.3, p, 0.2).total; }, {x}, 60, 18);
    CHECK(r.worst <= 1e-5);
    CHECK(r.nontrivial >= 20);
  }
  {
    Tensor x = gradcheck::random_tensor({2, 10, 2}, 19);
    auto r = gradcheck::check(
        [&] { return combined_loss(lp_relative(x, t1, 2), poisson_residual_fd(x, t1, 0.1, 2, 0.1)).total; }, {x}, 60,
        20);
    CHECK(r.worst <= 1e-5);
  }
}
