#pragma once

// Models that wrap another model's forward pass and delegate everything else.

#include <memory>
#include <vector>

#include "opforge/model.hpp"

namespace opforge {

// Per-channel min-max constants mapping each channel onto [0, 1].
struct Normalization {
  std::vector<double> in_min, in_max, out_min, out_max;

  bool empty() const { return in_min.empty(); }
  json to_json() const;
  static Normalization from_json(const json& j);
  // Combined constants over several sources: min of mins, max of maxes.
  static Normalization merge(const std::vector<Normalization>& parts);
};

class WrappedModel : public Model {
 public:
  explicit WrappedModel(std::shared_ptr<Model> inner) : inner_(std::move(inner)) {}
  std::vector<Param> parameters() const override { return inner_->parameters(); }
  std::string family() const override { return inner_->family(); }
  json config() const override { return inner_->config(); }
  Model& inner() { return *inner_; }
  const std::shared_ptr<Model>& inner_ptr() const { return inner_; }

 protected:
  std::shared_ptr<Model> inner_;
};

// Output forced to the sentinel wherever the input holds it.
class MaskedModel : public WrappedModel {
 public:
  MaskedModel(std::shared_ptr<Model> inner, double mask_value) : WrappedModel(std::move(inner)), value_(mask_value) {}
  Tensor forward(const Tensor& x) override;

 private:
  double value_;
};

// Output psi * inner(a) + g, pinning the boundary values to g where psi = 0.
class DirichletModel : public WrappedModel {
 public:
  DirichletModel(std::shared_ptr<Model> inner, Tensor psi, Tensor g);
  Tensor forward(const Tensor& x) override;

 private:
  Tensor psi_, g_;
};

// Inputs are normalized before the inner model and outputs mapped back to
// physical units, so losses compare physical fields.
class NormalizedModel : public WrappedModel {
 public:
  NormalizedModel(std::shared_ptr<Model> inner, Normalization norm);
  Tensor forward(const Tensor& x) override;
  const Normalization& normalization() const { return norm_; }

 private:
  Normalization norm_;
  std::vector<double> in_scale_, in_shift_, out_scale_, out_shift_;
};

std::shared_ptr<Model> wrap_output_mask(std::shared_ptr<Model> model, double mask_value);
std::shared_ptr<Model> wrap_dirichlet(std::shared_ptr<Model> model, Tensor psi, Tensor g);

}  // namespace opforge
