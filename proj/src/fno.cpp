#include "opforge/fno.hpp"

#include <cmath>
#include <numbers>

#include "opforge/error.hpp"
#include "opforge/fft.hpp"
#include "opforge/spectral.hpp"

namespace opforge {

FnoArc parse_fno_arc(const std::string& name) {
  if (name == "Classic") return FnoArc::Classic;
  if (name == "MLP" || name == "Zongyi") return FnoArc::MLP;
  if (name == "Residual") return FnoArc::Residual;
  throw ConfigError("unknown fno_arc '" + name + "' (expected Classic, MLP, Zongyi or Residual)");
}

std::string fno_arc_name(FnoArc arc) {
  switch (arc) {
    case FnoArc::Classic: return "Classic";
    case FnoArc::MLP: return "MLP";
    case FnoArc::Residual: return "Residual";
  }
  return "Classic";
}

void FnoConfig::validate() const {
  if (problem_dim < 1 || problem_dim > 2) throw ConfigError("fno: problem_dim must be 1 or 2");
  if (in_dim < 1 || out_dim < 1 || width < 1) throw ConfigError("fno: in_dim, out_dim and width must be positive");
  if (n_layers < 1) throw ConfigError("fno: n_layers must be at least 1");
  if (modes < 1) throw ConfigError("fno: modes must be at least 1");
  if (weights_norm != "Kaiming") throw ConfigError("fno: only Kaiming weight initialization is supported");
  parse_activation(fun_act);
  if (resolution != 0 && modes > resolution / 2 + 1)
    throw ConfigError("fno: modes " + std::to_string(modes) + " exceed the Nyquist bound " +
                      std::to_string(resolution / 2 + 1) + " at resolution " + std::to_string(resolution));
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

template <class T>
T get_req(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing config key '") + key + "'");
  return get_or<T>(j, key, T{});
}

bool get_flag(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) return v.get<long>() != 0;
  throw ConfigError(std::string("config key '") + key + "' must be a boolean or 0/1");
}

}  // namespace

FnoConfig FnoConfig::from_json(const json& j) {
  FnoConfig c;
  c.problem_dim = get_req<std::size_t>(j, "problem_dim");
  c.in_dim = get_req<std::size_t>(j, "in_dim");
  c.out_dim = get_req<std::size_t>(j, "out_dim");
  c.width = get_req<std::size_t>(j, "width");
  c.n_layers = get_req<std::size_t>(j, "n_layers");
  c.modes = get_req<std::size_t>(j, "modes");
  c.fun_act = get_req<std::string>(j, "fun_act");
  c.arc = parse_fno_arc(get_or<std::string>(j, "fno_arc", "Classic"));
  c.padding = get_or<std::size_t>(j, "padding", 0);
  c.include_grid = get_flag(j, "include_grid", true);
  c.fourier_features = get_or<std::size_t>(j, "FourierF", 0);
  c.weights_norm = get_or<std::string>(j, "weights_norm", "Kaiming");
  c.weight_sharing = get_flag(j, "RNN", false);
  c.retrain = get_or<std::uint64_t>(j, "retrain", 4);
  c.resolution = get_or<std::size_t>(j, "resolution", 0);
  c.validate();
  return c;
}

json FnoConfig::to_json() const {
  return {{"problem_dim", problem_dim}, {"in_dim", in_dim},
          {"out_dim", out_dim},         {"width", width},
          {"n_layers", n_layers},       {"modes", modes},
          {"fun_act", fun_act},         {"fno_arc", fno_arc_name(arc)},
          {"padding", padding},         {"include_grid", include_grid ? 1 : 0},
          {"FourierF", fourier_features}, {"weights_norm", weights_norm},
          {"RNN", weight_sharing},      {"retrain", retrain},
          {"resolution", resolution}};
}

ParamLayout fno_param_layout(const FnoConfig& c) {
  ParamLayout L;
  std::size_t w = c.width;
  L.emplace_back("lift.weight", Shape{c.lifted_inputs(), w});
  L.emplace_back("lift.bias", Shape{w});
  std::size_t stacks = c.weight_sharing ? 1 : c.n_layers;
  for (std::size_t t = 0; t < stacks; ++t) {
    std::string p = c.weight_sharing ? "layers.shared." : "layers." + std::to_string(t) + ".";
    L.emplace_back(p + "spectral", SpectralKernel::shape_for(c.problem_dim, c.modes, w, w));
    L.emplace_back(p + "w.weight", Shape{w, w});
    L.emplace_back(p + "w.bias", Shape{w});
    if (c.arc == FnoArc::MLP) {
      L.emplace_back(p + "mlp1.weight", Shape{w, w});
      L.emplace_back(p + "mlp1.bias", Shape{w});
      L.emplace_back(p + "mlp2.weight", Shape{w, w});
      L.emplace_back(p + "mlp2.bias", Shape{w});
    }
  }
  L.emplace_back("proj1.weight", Shape{w, 2 * w});
  L.emplace_back("proj1.bias", Shape{2 * w});
  L.emplace_back("proj2.weight", Shape{2 * w, c.out_dim});
  L.emplace_back("proj2.bias", Shape{c.out_dim});
  return L;
}

FnoModel::FnoModel(const FnoConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  act_ = parse_activation(cfg_.fun_act);
  Initializer init(seed);
  double spectral_scale = 1.0 / static_cast<double>(cfg_.width * cfg_.width);
  for (const auto& [name, shape] : fno_param_layout(cfg_)) {
    Tensor t;
    if (name.ends_with("bias"))
      t = init.zeros(shape);
    else if (name.ends_with("spectral"))
      t = init.normal(shape, spectral_scale);
    else
      t = init.kaiming(shape, shape[0]);
    params_.push_back({name, t});
  }
  std::size_t i = 0;
  lift_w_ = params_[i++].value;
  lift_b_ = params_[i++].value;
  std::size_t stacks = cfg_.weight_sharing ? 1 : cfg_.n_layers;
  for (std::size_t t = 0; t < stacks; ++t) {
    LayerParams lp;
    lp.spectral = params_[i++].value;
    lp.w = params_[i++].value;
    lp.b = params_[i++].value;
    if (cfg_.arc == FnoArc::MLP) {
      lp.mlp1_w = params_[i++].value;
      lp.mlp1_b = params_[i++].value;
      lp.mlp2_w = params_[i++].value;
      lp.mlp2_b = params_[i++].value;
    }
    layers_.push_back(lp);
  }
  proj1_w_ = params_[i++].value;
  proj1_b_ = params_[i++].value;
  proj2_w_ = params_[i++].value;
  proj2_b_ = params_[i++].value;

  // Fourier-feature frequencies come from the retrain seed, independent of the weight seed.
  std::mt19937_64 rng(cfg_.retrain);
  std::normal_distribution<double> normal(0.0, 1.0);
  fourier_b_.resize(cfg_.fourier_features * cfg_.problem_dim);
  for (auto& v : fourier_b_) v = normal(rng);
}

Tensor& FnoModel::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p.value;
  throw NotFoundError("fno has no parameter '" + name + "'");
}

Tensor FnoModel::append_features(const Tensor& x) const {
  std::size_t d = cfg_.problem_dim;
  if (x.rank() != d + 2)
    throw ShapeError("fno expects input [batch, " + std::string(d == 1 ? "n" : "n, n") + ", " +
                     std::to_string(cfg_.in_dim) + "], got " + shape_str(x.shape()));
  if (x.shape().back() != cfg_.in_dim)
    throw ShapeError("fno expects " + std::to_string(cfg_.in_dim) + " input channels, got " + shape_str(x.shape()));
  std::size_t extra = cfg_.lifted_inputs() - cfg_.in_dim;
  if (extra == 0) return x;
  std::size_t B = x.dim(0), n0 = x.dim(1), n1 = d == 2 ? x.dim(2) : 1;
  std::vector<double> feat(B * n0 * n1 * extra);
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      double coord[2] = {static_cast<double>(i) / static_cast<double>(n0),
                         static_cast<double>(j) / static_cast<double>(n1)};
      std::vector<double> f;
      if (cfg_.include_grid)
        for (std::size_t a = 0; a < d; ++a) f.push_back(coord[a]);
      for (std::size_t q = 0; q < cfg_.fourier_features; ++q) {
        double phase = 0.0;
        for (std::size_t a = 0; a < d; ++a) phase += fourier_b_[q * d + a] * coord[a];
        f.push_back(std::sin(2.0 * std::numbers::pi * phase));
      }
      for (std::size_t q = 0; q < cfg_.fourier_features; ++q) {
        double phase = 0.0;
        for (std::size_t a = 0; a < d; ++a) phase += fourier_b_[q * d + a] * coord[a];
        f.push_back(std::cos(2.0 * std::numbers::pi * phase));
      }
      for (std::size_t b = 0; b < B; ++b)
        std::copy(f.begin(), f.end(), feat.begin() + static_cast<long>(((b * n0 + i) * n1 + j) * extra));
    }
  Shape s = x.shape();
  s.back() = extra;
  return ops::concat_channels(x, Tensor::from(s, std::move(feat)));
}

Tensor FnoModel::lift(const Tensor& x) const { return ops::linear(append_features(x), lift_w_, lift_b_); }

Tensor FnoModel::layer(std::size_t t, const Tensor& v) const {
  const auto& lp = layers_[cfg_.weight_sharing ? 0 : t];
  Tensor kv = spectral_conv(v, lp.spectral, cfg_.modes);
  if (cfg_.arc == FnoArc::MLP) {
    kv = ops::linear(kv, lp.mlp1_w, lp.mlp1_b);
    kv = ops::activation(kv, act_);
    kv = ops::linear(kv, lp.mlp2_w, lp.mlp2_b);
  }
  Tensor out = ops::activation(ops::add(ops::linear(v, lp.w, lp.b), kv), act_);
  if (cfg_.arc == FnoArc::Residual) out = ops::add(v, out);
  return out;
}

Tensor FnoModel::project(const Tensor& v) const {
  Tensor h = ops::activation(ops::linear(v, proj1_w_, proj1_b_), act_);
  return ops::linear(h, proj2_w_, proj2_b_);
}

Tensor FnoModel::forward(const Tensor& x) {
  std::size_t d = cfg_.problem_dim;
  if (x.rank() != d + 2) throw ShapeError("fno: input rank does not match problem_dim, got " + shape_str(x.shape()));
  for (std::size_t a = 0; a < d; ++a) {
    std::size_t n = x.dim(1 + a);
    if (cfg_.modes > n / 2 + 1)
      throw ResolutionError("fno: resolution " + std::to_string(n) + " is below 2*(modes-1) = " +
                            std::to_string(2 * (cfg_.modes - 1)));
  }
  Tensor v = ops::pad_spatial(lift(x), cfg_.padding);
  for (std::size_t t = 0; t < cfg_.n_layers; ++t) v = layer(t, v);
  return project(ops::crop_spatial(v, cfg_.padding));
}

FnoModel build_fno(const FnoConfig& cfg, std::uint64_t seed) { return FnoModel(cfg, seed); }

}  // namespace opforge
