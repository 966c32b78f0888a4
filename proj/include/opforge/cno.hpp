#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opforge/model.hpp"
#include "opforge/ops.hpp"

namespace opforge {

struct CnoConfig {
  std::size_t problem_dim = 2;
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::size_t in_size = 64;  // r
  std::size_t n_layers = 3;  // L
  std::size_t n_res_neck = 2;  // M, bottleneck residual blocks
  std::size_t n_res = 1;       // N, residual blocks on each skip path
  std::size_t channel_multiplier = 16;
  std::size_t kernel_size = 5;
  std::string fun_act = "leaky_relu";
  std::uint64_t retrain = 4;

  std::size_t channels(std::size_t level) const {
    return channel_multiplier << (level == 0 ? 0 : level - 1);
  }
  void validate() const;

  // Keys: problem_dim, in_dim, out_dim, in_size, N_layers, N_res_neck, N_res,
  // channel_multiplier, kernel_size, fun_act, retrain.
  static CnoConfig from_json(const json& j);
  json to_json() const;
};

ParamLayout cno_param_layout(const CnoConfig& cfg);

// D o sigma o U: resample x to `fine` points per axis, apply the activation
// pointwise, resample back. fine = 0 means twice the input extent.
Tensor antialiased_activation(const Tensor& x, Activation act, std::size_t fine = 0);

class CnoModel : public Model {
 public:
  CnoModel(const CnoConfig& cfg, std::uint64_t seed);

  Tensor forward(const Tensor& x) override;
  std::vector<Param> parameters() const override { return params_; }
  std::string family() const override { return "cno"; }
  json config() const override { return cfg_.to_json(); }

  const CnoConfig& cfg() const { return cfg_; }
  Tensor& param(const std::string& name);

  // Building blocks, exposed for tests. `fine` is the extent at which
  // activations are evaluated.
  struct Conv {
    Tensor w, b;
  };
  Tensor conv(const Conv& c, const Tensor& x) const;
  Tensor conv_block(const Conv& c, const Tensor& x, std::size_t fine) const;  // Sigma o K
  Tensor residual_block(const Conv& c1, const Conv& c2, const Tensor& x, std::size_t fine) const;
  Tensor invariant_block(const Conv& c, const Tensor& x, std::size_t fine) const { return conv_block(c, x, fine); }

  const Conv& named_conv(const std::string& prefix) const;

 private:
  CnoConfig cfg_;
  Activation act_;
  std::vector<Param> params_;
  std::vector<std::pair<std::string, Conv>> convs_;
};

CnoModel build_cno(const CnoConfig& cfg, std::uint64_t seed);

}  // namespace opforge
