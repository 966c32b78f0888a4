#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "opforge/tensor.hpp"

namespace opforge {

using json = nlohmann::json;

struct Param {
  std::string name;
  Tensor value;
};

// (name, shape) pairs in the order a model registers its parameters.
using ParamLayout = std::vector<std::pair<std::string, Shape>>;

std::size_t layout_count(const ParamLayout& layout);

class Model {
 public:
  virtual ~Model() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  // Handles share storage with the model, so writes through them stick.
  virtual std::vector<Param> parameters() const = 0;
  virtual std::string family() const = 0;
  virtual json config() const = 0;
};

std::size_t count_params_exact(const Model& model);

// Draws used by every builder: Kaiming-normal weights, zero biases.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  Tensor kaiming(const Shape& shape, std::size_t fan_in);
  Tensor normal(const Shape& shape, double stddev);
  Tensor zeros(const Shape& shape);

 private:
  std::mt19937_64 rng_;
};

// Checkpoint directory: manifest.json (family, config, tensor index, extra
// metadata) and weights.bin (little-endian float64, tensors back to back).
void save_checkpoint(const Model& model, const std::filesystem::path& dir, const json& extra = json::object());

struct Checkpoint {
  std::unique_ptr<Model> model;
  json manifest;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Rebuilds a model of the named family from its config.
std::unique_ptr<Model> build_model(const std::string& family, const json& config, std::uint64_t seed);

// Helpers for raw little-endian float64 blobs.
void write_f64(const std::filesystem::path& file, const std::vector<double>& values);
std::vector<double> read_f64(const std::filesystem::path& file);
void write_text_atomic(const std::filesystem::path& file, const std::string& text);

}  // namespace opforge
