#include <cmath>
#include <cstring>
#include <numbers>

#include "doctest.h"
#include "gradcheck.hpp"
#include "opforge/budget.hpp"
#include "opforge/error.hpp"
#include "opforge/fft.hpp"
#include "opforge/fno.hpp"
#include "opforge/spectral.hpp"
#include "opforge/trainer.hpp"
#include "opforge/wrappers.hpp"
#include "testutil.hpp"

using namespace opforge;
using gradcheck::uniform_tensor;

namespace {

FnoConfig tiny(std::size_t d) {
  FnoConfig c;
  c.problem_dim = d;
  c.width = 3;
  c.n_layers = 2;
  c.modes = 3;
  c.fun_act = "gelu";
  return c;
}

std::vector<double> flat_params(const Model& m) {
  std::vector<double> v;
  for (const auto& p : m.parameters()) v.insert(v.end(), p.value.values().begin(), p.value.values().end());
  return v;
}

// Replaces every parameter with uniform [-1, 1] draws so that all paths
// carry O(1) gradients.
void randomize(Model& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& p : m.parameters())
    for (auto& v : p.value.values_mut()) v = u(rng);
}

void set_zero(Model& m) {
  for (auto& p : m.parameters())
    for (auto& v : p.value.values_mut()) v = 0.0;
}

// Sum of a few sines and cosines with frequencies below kmax.
Tensor band_input(std::size_t B, std::size_t d, std::size_t n, std::size_t kmax, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::size_t n1 = d == 2 ? n : 1;
  std::vector<double> v(B * n * n1, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k0 = 0; k0 < kmax; ++k0)
      for (std::size_t k1 = 0; k1 < (d == 2 ? kmax : 1); ++k1) {
        double a = u(rng), c = u(rng);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n1; ++j) {
            double ph = 2 * std::numbers::pi * (static_cast<double>(k0 * i) + static_cast<double>(k1 * j)) /
                        static_cast<double>(n);
            v[(b * n + i) * n1 + j] += a * std::cos(ph) + c * std::sin(ph);
          }
      }
  return Tensor::from(d == 2 ? Shape{B, n, n, 1} : Shape{B, n, 1}, v);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("config parsing, aliases and validation") {
  json j = {{"problem_dim", 2}, {"in_dim", 1}, {"out_dim", 1},      {"width", 8},   {"n_layers", 2},
            {"modes", 5},       {"fun_act", "tanh"}, {"fno_arc", "Zongyi"}, {"padding", 2}, {"include_grid", 1},
            {"FourierF", 0},    {"RNN", false},  {"retrain", 7},      {"resolution", 16}};
  FnoConfig c = FnoConfig::from_json(j);
  CHECK(c.arc == FnoArc::MLP);
  CHECK(c.lifted_inputs() == 3);
  CHECK(FnoConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.fourier_features = 2;
  CHECK(c.lifted_inputs() == 7);

  json bad = j;
  bad["modes"] = 10;  // 16 / 2 + 1 = 9
  CHECK_THROWS_AS(FnoConfig::from_json(bad), ConfigError);
  bad = j;
  bad["modes"] = 9;
  CHECK_NOTHROW(FnoConfig::from_json(bad));
  bad = j;
  bad["fno_arc"] = "Spiral";
  CHECK_THROWS_AS(FnoConfig::from_json(bad), ConfigError);
  bad = j;
  bad.erase("width");
  CHECK_THROWS_AS(FnoConfig::from_json(bad), ConfigError);
  bad = j;
  bad["fun_act"] = "softsign";
  CHECK_THROWS_AS(FnoConfig::from_json(bad), ConfigError);
}

TEST_CASE("same config and seed give bit-identical parameters") {
  FnoConfig c = tiny(2);
  auto a = flat_params(FnoModel(c, 11)), b = flat_params(FnoModel(c, 11)), other = flat_params(FnoModel(c, 12));
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  CHECK(a != other);
}

TEST_CASE("spectral weight counts follow the closed form") {
  FnoConfig c;
  c.problem_dim = 2;
  c.n_layers = 4;
  c.width = 32;
  c.modes = 32;
  std::size_t spectral = 0;
  for (const auto& [name, shape] : fno_param_layout(c))
    if (name.ends_with("spectral")) spectral += numel(shape);
  CHECK(spectral == 16777216);
  CHECK(count_params_fno_formula(c) == 16777216);

  FnoConfig t = tiny(1);
  t.n_layers = 3;
  FnoModel m(t, 1);
  std::size_t s = 0;
  for (const auto& p : m.parameters())
    if (p.name.ends_with("spectral")) s += p.value.size();
  CHECK(s == count_params_fno_formula(t));
}

TEST_CASE("exact parameter count of a tiny model equals a hand enumeration") {
  FnoConfig c;
  c.problem_dim = 1;
  c.width = 2;
  c.n_layers = 1;
  c.modes = 2;
  c.include_grid = false;
  FnoModel m(c, 3);
  // lift 1*2+2, spectral 2 modes * 2*2 * (re, im), W 2*2+2, proj 2*4+4 and 4*1+1
  std::size_t expect = (1 * 2 + 2) + (2 * 2 * 2 * 2) + (2 * 2 + 2) + (2 * 4 + 4) + (4 * 1 + 1);
  CHECK(count_params_exact(m) == expect);
  CHECK(layout_count(fno_param_layout(c)) == expect);

  testutil::TempDir dir("fno-count");
  save_checkpoint(m, dir.path());
  CHECK(std::filesystem::file_size(dir / "weights.bin") / 8 == count_params_exact(m));
}

TEST_CASE("weight sharing keeps one parameter set for the whole stack") {
  FnoConfig c = tiny(1);
  c.weight_sharing = true;
  c.n_layers = 4;
  FnoConfig one = c;
  one.n_layers = 1;
  CHECK(count_params_exact(FnoModel(c, 1)) == count_params_exact(FnoModel(one, 1)));
  FnoModel m(c, 1);
  Tensor x = uniform_tensor({1, 8, 1}, 2, false);
  Tensor v = m.lift(x);
  CHECK(max_abs_diff(m.layer(0, v).values(), m.layer(3, v).values()) == 0.0);
}

TEST_CASE("layer variants on identity kernels") {
  const std::size_t n = 8, w = 2;
  FnoConfig c;
  c.problem_dim = 1;
  c.width = w;
  c.n_layers = 1;
  c.modes = n / 2 + 1;
  c.fun_act = "identity";
  c.include_grid = false;
  FnoModel m(c, 5);
  auto& R = m.param("layers.0.spectral");
  std::fill(R.values_mut().begin(), R.values_mut().end(), 0.0);
  for (std::size_t k = 0; k < c.modes; ++k)
    for (std::size_t i = 0; i < w; ++i) R.values_mut()[((k * w + i) * w + i) * 2] = 1.0;
  auto& W = m.param("layers.0.w.weight");
  std::fill(W.values_mut().begin(), W.values_mut().end(), 0.0);
  for (std::size_t i = 0; i < w; ++i) W.values_mut()[i * w + i] = 1.0;
  Tensor v = uniform_tensor({2, n, w}, 6, false);
  Tensor twice = ops::scale(v, 2.0);
  CHECK(max_abs_diff(m.layer(0, v).values(), twice.values()) <= 1e-14);

  FnoConfig cr = c;
  cr.fun_act = "relu";
  FnoModel mr(cr, 5);
  std::copy(R.values().begin(), R.values().end(), mr.param("layers.0.spectral").values_mut().begin());
  auto& Wr = mr.param("layers.0.w.weight");
  std::fill(Wr.values_mut().begin(), Wr.values_mut().end(), 0.0);
  Tensor relu_v = ops::activation(v, Activation::Relu);
  CHECK(max_abs_diff(mr.layer(0, v).values(), relu_v.values()) <= 1e-14);

  FnoConfig res = c;
  res.arc = FnoArc::Residual;
  FnoModel mres(res, 5);
  std::copy(R.values().begin(), R.values().end(), mres.param("layers.0.spectral").values_mut().begin());
  std::copy(W.values().begin(), W.values().end(), mres.param("layers.0.w.weight").values_mut().begin());
  CHECK(max_abs_diff(mres.layer(0, v).values(), ops::scale(v, 3.0).values()) <= 1e-14);
}

TEST_CASE("all-zero weights give an all-zero output") {
  FnoConfig c = tiny(2);
  c.fun_act = "relu";
  FnoModel m(c, 1);
  set_zero(m);
  Tensor y = m.forward(uniform_tensor({2, 8, 8, 1}, 3, false));
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("forward shape contract and resolution errors") {
  FnoConfig c;
  c.problem_dim = 2;
  c.width = 4;
  c.n_layers = 1;
  c.modes = 6;
  c.padding = 3;
  FnoModel m(c, 1);
  Tensor y = m.forward(uniform_tensor({2, 64, 64, 1}, 4, false));
  CHECK(y.shape() == Shape{2, 64, 64, 1});
  CHECK_THROWS_AS(m.forward(uniform_tensor({1, 8, 8, 1}, 4, false)), ResolutionError);
  CHECK_THROWS_AS(m.forward(uniform_tensor({1, 16, 1}, 4, false)), ShapeError);
  CHECK_THROWS_AS(m.forward(uniform_tensor({1, 16, 16, 2}, 4, false)), ShapeError);
}

TEST_CASE("Fourier features and grid channels") {
  FnoConfig c = tiny(2);
  c.fourier_features = 2;
  FnoModel m(c, 1);
  Tensor f = m.append_features(Tensor::zeros({1, 4, 4, 1}));
  CHECK(f.shape() == Shape{1, 4, 4, 1 + 2 + 4});
  // grid channels at node (i, j) are (i/4, j/4); sin^2 + cos^2 = 1 per feature
  std::size_t C = 7;
  std::size_t node = 2 * 4 + 3;
  CHECK(f.at(node * C + 1) == 0.5);
  CHECK(f.at(node * C + 2) == 0.75);
  for (std::size_t q = 0; q < 2; ++q) {
    double s = f.at(node * C + 3 + q), co = f.at(node * C + 5 + q);
    CHECK(std::abs(s * s + co * co - 1.0) <= 1e-14);
  }
  FnoModel again(c, 99);
  Tensor f2 = again.append_features(Tensor::zeros({1, 4, 4, 1}));
  CHECK(max_abs_diff(f.values(), f2.values()) == 0.0);
}

TEST_CASE("full-model gradient checks for every variant") {
  for (std::size_t d : {1u, 2u})
    for (FnoArc arc : {FnoArc::Classic, FnoArc::MLP, FnoArc::Residual}) {
      FnoConfig c = tiny(d);
      c.arc = arc;
      c.padding = 1;
      c.fourier_features = 1;
      c.fun_act = d == 1 ? "tanh" : "gelu";
      FnoModel m(c, 7);
      randomize(m, 8);
      Tensor x = uniform_tensor(d == 1 ? Shape{2, 8, 1} : Shape{1, 8, 6, 1}, 9, false);
      std::vector<Tensor> leaves;
      for (auto& p : m.parameters()) leaves.push_back(p.value);
      Tensor w;
      auto f = [&] {
        Tensor y = m.forward(x);
        if (!w.defined()) w = gradcheck::random_like(y, 10);
        return ops::sum(ops::mul(y, w));
      };
      CAPTURE(d);
      CAPTURE(fno_arc_name(arc));
      auto r = gradcheck::check(f, leaves, 100, 11);
      CHECK(r.worst <= 1e-5);
      CHECK(r.nontrivial >= 50);
    }
}

TEST_CASE("resolution transfer is exact for band-limited inputs with identity activation") {
  for (std::size_t d : {1u, 2u}) {
    FnoConfig c;
    c.problem_dim = d;
    c.width = 4;
    c.n_layers = 2;
    c.modes = 4;
    c.fun_act = "identity";
    c.include_grid = false;
    FnoModel m(c, 13);
    const std::size_t n = 16;
    Tensor lo = band_input(2, d, n, c.modes, 14);
    Tensor hi = band_input(2, d, 2 * n, c.modes, 14);
    Tensor y_lo = resample_spectral(m.forward(lo), 2 * n);
    Tensor y_hi = m.forward(hi);
    CAPTURE(d);
    CHECK(max_abs_diff(y_lo.values(), y_hi.values()) <= 1e-8);
  }
}

TEST_CASE("spectral convolution stays real and consistent after optimizer steps") {
  FnoConfig c = tiny(2);
  FnoModel m(c, 15);
  randomize(m, 16);
  std::vector<Param> params = m.parameters();
  AdamState state;
  Tensor x = uniform_tensor({2, 8, 8, 1}, 17, false);
  for (int step = 0; step < 3; ++step) {
    for (auto& p : params) p.value.zero_grad();
    backward(ops::sum(ops::mul(m.forward(x), m.forward(x))));
    adamw_step(params, state, 1e-2, 1e-4);
  }
  // The layer's spectral path equals the explicit transform route.
  Tensor v = m.lift(x);
  Tensor R = m.param("layers.0.spectral");
  Tensor direct = spectral_conv(v, R, c.modes);
  SpectralKernel K;
  K.dims = 2;
  K.kmax = c.modes;
  K.cin = K.cout = c.width;
  K.data.assign(R.values().begin(), R.values().end());
  std::size_t per = 8 * 8 * c.width;
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<double> one(v.values().begin() + b * per, v.values().begin() + (b + 1) * per);
    Tensor ref = irfft_nd(spectral_multiply(rfft_nd(Tensor::from({8, 8, c.width}, one), {0, 1}), K));
    std::span<const double> got(direct.values().data() + b * per, per);
    CHECK(max_abs_diff(got, ref.values()) <= 1e-10);
  }
  Tensor out = m.forward(x);
  for (double y : out.values()) CHECK(std::isfinite(y));
}

TEST_CASE("checkpoints rebuild a bit-identical model") {
  FnoConfig c = tiny(1);
  c.arc = FnoArc::MLP;
  c.fourier_features = 2;
  FnoModel m(c, 21);
  randomize(m, 22);
  testutil::TempDir dir("fno-ckpt");
  save_checkpoint(m, dir.path(), {{"note", "x"}});
  auto ck = load_checkpoint(dir.path());
  CHECK(ck.model->family() == "fno");
  CHECK(ck.manifest.at("note") == "x");
  auto a = flat_params(m), b = flat_params(*ck.model);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  Tensor x = uniform_tensor({2, 8, 1}, 23, false);
  CHECK(max_abs_diff(m.forward(x).values(), ck.model->forward(x).values()) == 0.0);
}

TEST_CASE("output mask wrapper") {
  auto inner = std::make_shared<FnoModel>(tiny(1), 31);
  auto masked = wrap_output_mask(inner, 1.0);
  CHECK(masked->family() == "fno");
  CHECK(masked->parameters().size() == inner->parameters().size());

  Tensor all = Tensor::full({2, 8, 1}, 1.0);
  Tensor ya = masked->forward(all);
  for (double v : ya.values()) CHECK(v == 1.0);

  Tensor none = uniform_tensor({2, 8, 1}, 32, false);
  CHECK(max_abs_diff(masked->forward(none).values(), inner->forward(none).values()) == 0.0);

  std::vector<double> mixed(none.values().begin(), none.values().end());
  for (std::size_t i = 0; i < mixed.size(); i += 3) mixed[i] = 1.0;
  Tensor xm = Tensor::from({2, 8, 1}, mixed);
  Tensor ym = masked->forward(xm), yi = inner->forward(xm);
  for (std::size_t i = 0; i < mixed.size(); ++i) CHECK(ym.at(i) == (mixed[i] == 1.0 ? 1.0 : yi.at(i)));
}

TEST_CASE("Dirichlet wrapper") {
  auto inner = std::make_shared<FnoModel>(tiny(2), 41);
  Tensor x = uniform_tensor({2, 8, 8, 1}, 42, false);
  Tensor g = uniform_tensor({8, 8, 1}, 43, false);
  auto zero_psi = wrap_dirichlet(inner, Tensor::zeros({8, 8, 1}), g);
  Tensor y0 = zero_psi->forward(x);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 64; ++i) CHECK(y0.at(b * 64 + i) == g.at(i));

  auto unit = wrap_dirichlet(inner, Tensor::full({8, 8, 1}, 1.0), Tensor::zeros({8, 8, 1}));
  CHECK(max_abs_diff(unit->forward(x).values(), inner->forward(x).values()) == 0.0);

  // psi vanishes on the boundary ring and is one inside.
  std::vector<double> psi(64, 1.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      if (i == 0 || j == 0 || i == 7 || j == 7) psi[i * 8 + j] = 0.0;
  auto pinned = wrap_dirichlet(inner, Tensor::from({8, 8, 1}, psi), g);
  Tensor yp = pinned->forward(x);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 64; ++i)
      if (psi[i] == 0.0) CHECK(yp.at(b * 64 + i) == g.at(i));

  CHECK_THROWS_AS(wrap_dirichlet(inner, Tensor::zeros({8, 8, 1}), Tensor::zeros({8, 1})), ShapeError);
}
