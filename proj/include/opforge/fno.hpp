#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opforge/model.hpp"
#include "opforge/ops.hpp"

namespace opforge {

enum class FnoArc { Classic, MLP, Residual };

FnoArc parse_fno_arc(const std::string& name);  // "Zongyi" maps to MLP
std::string fno_arc_name(FnoArc arc);

struct FnoConfig {
  std::size_t problem_dim = 1;
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::size_t width = 32;
  std::size_t n_layers = 1;
  std::size_t modes = 12;
  std::string fun_act = "gelu";
  FnoArc arc = FnoArc::Classic;
  std::size_t padding = 0;
  bool include_grid = true;
  std::size_t fourier_features = 0;
  std::string weights_norm = "Kaiming";
  bool weight_sharing = false;
  std::uint64_t retrain = 4;
  // Training resolution the config is declared for; 0 leaves it unchecked.
  std::size_t resolution = 0;

  std::size_t lifted_inputs() const { return in_dim + (include_grid ? problem_dim : 0) + 2 * fourier_features; }
  void validate() const;

  // Keys follow the tuning config space: problem_dim, in_dim, out_dim, width,
  // n_layers, modes, fun_act, fno_arc, padding, include_grid, FourierF,
  // weights_norm, RNN, retrain, resolution.
  static FnoConfig from_json(const json& j);
  json to_json() const;
};

// Parameter names and shapes in registration order; needs no allocation, so
// it also serves configurations too large to build.
ParamLayout fno_param_layout(const FnoConfig& cfg);

class FnoModel : public Model {
 public:
  FnoModel(const FnoConfig& cfg, std::uint64_t seed);

  Tensor forward(const Tensor& x) override;
  std::vector<Param> parameters() const override { return params_; }
  std::string family() const override { return "fno"; }
  json config() const override { return cfg_.to_json(); }

  const FnoConfig& cfg() const { return cfg_; }

  // Pieces of forward(), exposed for tests.
  Tensor append_features(const Tensor& x) const;
  Tensor lift(const Tensor& x) const;
  Tensor layer(std::size_t t, const Tensor& v) const;
  Tensor project(const Tensor& v) const;

  Tensor& param(const std::string& name);

 private:
  struct LayerParams {
    Tensor spectral, w, b, mlp1_w, mlp1_b, mlp2_w, mlp2_b;
  };
  FnoConfig cfg_;
  Activation act_;
  std::vector<Param> params_;
  Tensor lift_w_, lift_b_, proj1_w_, proj1_b_, proj2_w_, proj2_b_;
  std::vector<LayerParams> layers_;
  std::vector<double> fourier_b_;  // [fourier_features, problem_dim]
};

FnoModel build_fno(const FnoConfig& cfg, std::uint64_t seed);

}  // namespace opforge
