#include "opforge/wrappers.hpp"

#include <algorithm>

#include "opforge/error.hpp"
#include "opforge/ops.hpp"

namespace opforge {

json Normalization::to_json() const {
  return {{"in_min", in_min}, {"in_max", in_max}, {"out_min", out_min}, {"out_max", out_max}};
}

Normalization Normalization::from_json(const json& j) {
  Normalization n;
  try {
    n.in_min = j.at("in_min").get<std::vector<double>>();
    n.in_max = j.at("in_max").get<std::vector<double>>();
    n.out_min = j.at("out_min").get<std::vector<double>>();
    n.out_max = j.at("out_max").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed normalization record: ") + e.what());
  }
  return n;
}

Normalization Normalization::merge(const std::vector<Normalization>& parts) {
  if (parts.empty()) throw ContractError("cannot merge an empty list of normalizations");
  Normalization n = parts.front();
  for (const auto& p : parts) {
    if (p.in_min.size() != n.in_min.size() || p.out_min.size() != n.out_min.size())
      throw ContractError("normalizations with different channel counts cannot be merged");
    for (std::size_t c = 0; c < n.in_min.size(); ++c) {
      n.in_min[c] = std::min(n.in_min[c], p.in_min[c]);
      n.in_max[c] = std::max(n.in_max[c], p.in_max[c]);
    }
    for (std::size_t c = 0; c < n.out_min.size(); ++c) {
      n.out_min[c] = std::min(n.out_min[c], p.out_min[c]);
      n.out_max[c] = std::max(n.out_max[c], p.out_max[c]);
    }
  }
  return n;
}

Tensor MaskedModel::forward(const Tensor& x) {
  Tensor y = inner_->forward(x);
  return ops::mask_fill(y, x, value_);
}

DirichletModel::DirichletModel(std::shared_ptr<Model> inner, Tensor psi, Tensor g)
    : WrappedModel(std::move(inner)), psi_(std::move(psi)), g_(std::move(g)) {
  if (psi_.shape() != g_.shape()) throw ShapeError("wrap_dirichlet: psi and g must have the same shape");
}

Tensor DirichletModel::forward(const Tensor& x) { return ops::field_mul_add(inner_->forward(x), psi_, g_); }

NormalizedModel::NormalizedModel(std::shared_ptr<Model> inner, Normalization norm)
    : WrappedModel(std::move(inner)), norm_(std::move(norm)) {
  auto range = [](double lo, double hi) { return hi > lo ? hi - lo : 1.0; };
  for (std::size_t c = 0; c < norm_.in_min.size(); ++c) {
    double r = range(norm_.in_min[c], norm_.in_max[c]);
    in_scale_.push_back(1.0 / r);
    in_shift_.push_back(-norm_.in_min[c] / r);
  }
  for (std::size_t c = 0; c < norm_.out_min.size(); ++c) {
    out_scale_.push_back(range(norm_.out_min[c], norm_.out_max[c]));
    out_shift_.push_back(norm_.out_min[c]);
  }
}

Tensor NormalizedModel::forward(const Tensor& x) {
  Tensor y = inner_->forward(ops::channel_affine(x, in_scale_, in_shift_));
  return ops::channel_affine(y, out_scale_, out_shift_);
}

std::shared_ptr<Model> wrap_output_mask(std::shared_ptr<Model> model, double mask_value) {
  return std::make_shared<MaskedModel>(std::move(model), mask_value);
}

std::shared_ptr<Model> wrap_dirichlet(std::shared_ptr<Model> model, Tensor psi, Tensor g) {
  return std::make_shared<DirichletModel>(std::move(model), std::move(psi), std::move(g));
}

}  // namespace opforge
