#include "opforge/cno.hpp"

#include "opforge/error.hpp"
#include "opforge/spectral.hpp"

namespace opforge {

namespace {

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

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

}  // namespace

void CnoConfig::validate() const {
  if (problem_dim < 1 || problem_dim > 2) throw ConfigError("cno: problem_dim must be 1 or 2");
  if (in_dim < 1 || out_dim < 1) throw ConfigError("cno: in_dim and out_dim must be positive");
  if (n_layers < 1 || n_res_neck < 1 || n_res < 1) throw ConfigError("cno: N_layers, N_res_neck, N_res must be >= 1");
  if (channel_multiplier < 1) throw ConfigError("cno: channel_multiplier must be >= 1");
  if (kernel_size != 3 && kernel_size != 5 && kernel_size != 7) throw ConfigError("cno: kernel_size must be 3, 5 or 7");
  parse_activation(fun_act);
  std::size_t levels = std::size_t{1} << n_layers;
  if (in_size % levels != 0)
    throw ConfigError("cno: resolution " + std::to_string(in_size) + " is not divisible by 2^L = " + std::to_string(levels));
  if (!is_pow2(in_size) || in_size < 4 * levels)
    throw ConfigError("cno: resolution must be a power of two of at least 2^L*4 = " + std::to_string(4 * levels));
}

CnoConfig CnoConfig::from_json(const json& j) {
  CnoConfig c;
  c.problem_dim = get_req<std::size_t>(j, "problem_dim");
  c.in_dim = get_req<std::size_t>(j, "in_dim");
  c.out_dim = get_req<std::size_t>(j, "out_dim");
  c.in_size = get_req<std::size_t>(j, "in_size");
  c.n_layers = get_req<std::size_t>(j, "N_layers");
  c.n_res_neck = get_req<std::size_t>(j, "N_res_neck");
  c.n_res = get_req<std::size_t>(j, "N_res");
  c.channel_multiplier = get_req<std::size_t>(j, "channel_multiplier");
  c.kernel_size = get_req<std::size_t>(j, "kernel_size");
  c.fun_act = get_or<std::string>(j, "fun_act", "leaky_relu");
  c.retrain = get_or<std::uint64_t>(j, "retrain", 4);
  c.validate();
  return c;
}

json CnoConfig::to_json() const {
  return {{"problem_dim", problem_dim}, {"in_dim", in_dim},
          {"out_dim", out_dim},         {"in_size", in_size},
          {"N_layers", n_layers},       {"N_res_neck", n_res_neck},
          {"N_res", n_res},             {"channel_multiplier", channel_multiplier},
          {"kernel_size", kernel_size}, {"fun_act", fun_act},
          {"retrain", retrain}};
}

ParamLayout cno_param_layout(const CnoConfig& c) {
  ParamLayout L;
  auto add = [&](const std::string& name, std::size_t cin, std::size_t cout) {
    Shape w(c.problem_dim, c.kernel_size);
    w.push_back(cin);
    w.push_back(cout);
    L.emplace_back(name + ".weight", w);
    L.emplace_back(name + ".bias", Shape{cout});
  };
  std::size_t levels = c.n_layers;
  add("lift", c.in_dim, c.channels(0));
  for (std::size_t j = 0; j < levels; ++j) add("enc." + std::to_string(j), c.channels(j), c.channels(j + 1));
  for (std::size_t m = 0; m < c.n_res_neck; ++m) {
    add("neck." + std::to_string(m) + ".a", c.channels(levels), c.channels(levels));
    add("neck." + std::to_string(m) + ".b", c.channels(levels), c.channels(levels));
  }
  for (std::size_t j = 0; j < levels; ++j)
    for (std::size_t n = 0; n < c.n_res; ++n) {
      std::string p = "skip." + std::to_string(j) + "." + std::to_string(n);
      add(p + ".a", c.channels(j), c.channels(j));
      add(p + ".b", c.channels(j), c.channels(j));
    }
  for (std::size_t j = levels; j-- > 0;) {
    std::size_t cin = j + 1 == levels ? c.channels(levels) : 2 * c.channels(j + 1);
    add("dec." + std::to_string(j), cin, c.channels(j));
    add("inv." + std::to_string(j), 2 * c.channels(j), 2 * c.channels(j));
  }
  add("proj", 2 * c.channels(0), c.out_dim);
  return L;
}

Tensor antialiased_activation(const Tensor& x, Activation act, std::size_t fine) {
  if (x.rank() < 3) throw ShapeError("activation expects [batch, spatial..., channels]");
  std::size_t n = x.dim(1);
  if (n < 4) throw ResolutionError("anti-aliased activation needs at least 4 points per axis");
  if (fine == 0) fine = 2 * n;
  Tensor up = resample_spectral(x, fine);
  return resample_spectral(ops::activation(up, act), n);
}

CnoModel::CnoModel(const CnoConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  act_ = parse_activation(cfg_.fun_act);
  Initializer init(seed);
  auto layout = cno_param_layout(cfg_);
  for (std::size_t i = 0; i < layout.size(); i += 2) {
    const auto& [wname, wshape] = layout[i];
    const auto& [bname, bshape] = layout[i + 1];
    std::size_t fan_in = numel(wshape) / wshape.back();
    Conv c{init.kaiming(wshape, fan_in), init.zeros(bshape)};
    params_.push_back({wname, c.w});
    params_.push_back({bname, c.b});
    convs_.emplace_back(wname.substr(0, wname.size() - std::string(".weight").size()), c);
  }
}

Tensor& CnoModel::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p.value;
  throw NotFoundError("cno has no parameter '" + name + "'");
}

const CnoModel::Conv& CnoModel::named_conv(const std::string& prefix) const {
  for (const auto& [name, c] : convs_)
    if (name == prefix) return c;
  throw NotFoundError("cno has no convolution '" + prefix + "'");
}

Tensor CnoModel::conv(const Conv& c, const Tensor& x) const { return ops::conv_spatial(x, c.w, c.b, Padding::Periodic); }

Tensor CnoModel::conv_block(const Conv& c, const Tensor& x, std::size_t fine) const {
  return antialiased_activation(conv(c, x), act_, fine);
}

Tensor CnoModel::residual_block(const Conv& c1, const Conv& c2, const Tensor& x, std::size_t fine) const {
  return ops::add(x, conv(c2, conv_block(c1, x, fine)));
}

Tensor CnoModel::forward(const Tensor& x) {
  std::size_t d = cfg_.problem_dim, L = cfg_.n_layers;
  if (x.rank() != d + 2 || x.shape().back() != cfg_.in_dim)
    throw ShapeError("cno expects [batch, r" + std::string(d == 2 ? ", r" : "") + ", " + std::to_string(cfg_.in_dim) +
                     "], got " + shape_str(x.shape()));
  std::size_t r = x.dim(1);
  for (std::size_t a = 1; a < d; ++a)
    if (x.dim(1 + a) != r) throw ResolutionError("cno needs equal extents on every axis, got " + shape_str(x.shape()));
  if (!is_pow2(r) || r < (std::size_t{4} << L))
    throw ResolutionError("cno: extent " + std::to_string(r) + " must be a power of two of at least " +
                          std::to_string(std::size_t{4} << L));
  // Every activation is evaluated on a grid twice as fine as the input, so the
  // network commutes with any cyclic shift of the input grid.
  std::size_t fine = 2 * r;
  auto lvl = [r](std::size_t j) { return r >> j; };

  Tensor h = conv_block(named_conv("lift"), x, fine);
  std::vector<Tensor> skips(L);
  for (std::size_t j = 0; j < L; ++j) {
    Tensor s = h;
    for (std::size_t n = 0; n < cfg_.n_res; ++n) {
      std::string p = "skip." + std::to_string(j) + "." + std::to_string(n);
      s = residual_block(named_conv(p + ".a"), named_conv(p + ".b"), s, fine);
    }
    skips[j] = s;
    h = conv_block(named_conv("enc." + std::to_string(j)), h, fine);
    h = resample_spectral(h, lvl(j + 1));
  }
  for (std::size_t m = 0; m < cfg_.n_res_neck; ++m) {
    std::string p = "neck." + std::to_string(m);
    h = residual_block(named_conv(p + ".a"), named_conv(p + ".b"), h, fine);
  }
  for (std::size_t j = L; j-- > 0;) {
    h = conv_block(named_conv("dec." + std::to_string(j)), h, fine);
    h = resample_spectral(h, lvl(j));
    h = ops::concat_channels(h, skips[j]);
    h = invariant_block(named_conv("inv." + std::to_string(j)), h, fine);
  }
  return conv(named_conv("proj"), h);
}

CnoModel build_cno(const CnoConfig& cfg, std::uint64_t seed) { return CnoModel(cfg, seed); }

}  // namespace opforge
