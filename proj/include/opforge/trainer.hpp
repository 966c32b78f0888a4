#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "opforge/datasets.hpp"
#include "opforge/losses.hpp"
#include "opforge/model.hpp"

namespace opforge {

// Training keys: learning_rate, weight_decay, scheduler_gamma,
// scheduler_step, batch_size, epochs, retrain.
struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double scheduler_gamma = 0.98;
  std::size_t scheduler_step = 10;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 4;

  void validate() const;
  static TrainConfig from_json(const json& j);
  json to_json() const;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
};

// Decoupled weight decay, then a bias-corrected Adam step. Parameters with
// no gradient yet count as zero gradient.
void adamw_step(std::vector<Param>& params, AdamState& state, double lr, double weight_decay, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

// lr0 * gamma^floor((epoch - 1) / step), epochs counted from 1.
double lr_at_epoch(double lr0, double gamma, std::size_t step, std::size_t epoch);

struct TrainRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_s = 0.0;

  json to_json() const;
  static TrainRecord from_json(const json& j);
};

// (prediction, target, model input) -> batch-summed loss.
using LossFn = std::function<LossValue(const Tensor& pred, const Tensor& target, const Tensor& input)>;
LossFn relative_l1_loss();
LossFn relative_lp_loss(double p);
// Data term plus alpha * ||-lap_h(pred) - input||_p on the interior.
LossFn poisson_informed_loss(double p_data, double alpha, double p_phys, double h);

struct EvalResult {
  double mean = 0.0;
  std::vector<double> per_sample;
};

// Gradient-free evaluation; per-sample values are in source order.
EvalResult evaluate(Model& model, const DatasetCollection& data, Split split, const LossFn& metric,
                    std::size_t batch_size = 64);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: nothing is written
  // Called after each epoch; returning false stops training.
  std::function<bool(const TrainRecord&)> on_epoch;
  LossFn metric;  // validation metric, relative L1 when unset
};

struct TrainResult {
  std::shared_ptr<Model> model;
  std::vector<TrainRecord> records;
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Mini-batch AdamW on the train split, evaluated on validation each epoch.
// With an out_dir, writes metrics.jsonl and the best/ and final/ checkpoints.
TrainResult train_model(std::shared_ptr<Model> model, const DatasetCollection& data, const TrainConfig& cfg,
                        const LossFn& loss, const TrainOptions& opts = {});

using ModelBuilder = std::function<std::shared_ptr<Model>(const json& config)>;
using DatasetBuilder = std::function<DatasetCollection(const json& config)>;

// Builds data and model from one merged config, wraps the model so it sees
// normalized inputs, and trains it. Results land in opts.out_dir / name.
TrainResult train_fixed_model(const json& config, const ModelBuilder& model_builder,
                              const DatasetBuilder& dataset_builder, const LossFn& loss, const std::string& name,
                              TrainOptions opts = {});

// Builder for the two shipped families; the family is taken from the
// config's "family" key when present, else from `family`.
ModelBuilder default_model_builder(const std::string& family);

// Loads a checkpoint written by train_model, restoring the normalization wrapper.
std::shared_ptr<Model> load_trained_model(const std::filesystem::path& checkpoint_dir);

}  // namespace opforge
