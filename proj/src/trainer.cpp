#include "opforge/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "opforge/error.hpp"
#include "opforge/wrappers.hpp"

namespace opforge {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(scheduler_gamma > 0.0 && scheduler_gamma <= 1.0)) throw ConfigError("scheduler_gamma must lie in (0, 1]");
  if (scheduler_step < 1) throw ConfigError("scheduler_step must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.scheduler_gamma = j.value("scheduler_gamma", c.scheduler_gamma);
    c.scheduler_step = j.value("scheduler_step", c.scheduler_step);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("retrain", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"weight_decay", weight_decay}, {"scheduler_gamma", scheduler_gamma},
          {"scheduler_step", scheduler_step}, {"batch_size", batch_size},   {"epochs", epochs},
          {"retrain", seed}};
}

void adamw_step(std::vector<Param>& params, AdamState& st, double lr, double wd, double b1, double b2, double eps) {
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), {});
    st.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      st.m[i].assign(params[i].value.size(), 0.0);
      st.v[i].assign(params[i].value.size(), 0.0);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].value.has_grad()) continue;
    for (double g : params[i].value.grad())
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter '" + params[i].name + "'");
  }
  ++st.step;
  double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.values_mut();
    if (st.m[i].size() != w.size()) throw ContractError("optimizer state does not match parameter '" + params[i].name + "'");
    bool has = params[i].value.has_grad();
    auto g = has ? params[i].value.grad() : std::span<const double>{};
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      double gk = has ? g[k] : 0.0;
      w[k] *= 1.0 - lr * wd;
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }
}

double lr_at_epoch(double lr0, double gamma, std::size_t step, std::size_t epoch) {
  if (epoch < 1) throw ArgumentError("epochs are counted from 1");
  if (step < 1) throw ArgumentError("scheduler step must be at least 1");
  return lr0 * std::pow(gamma, static_cast<double>((epoch - 1) / step));
}

json TrainRecord::to_json() const {
  return {{"epoch", epoch}, {"train_loss", train_loss}, {"val_loss", val_loss}, {"lr", lr}, {"wall_s", wall_s}};
}

TrainRecord TrainRecord::from_json(const json& j) {
  return {j.at("epoch").get<std::size_t>(), j.at("train_loss").get<double>(), j.at("val_loss").get<double>(),
          j.at("lr").get<double>(), j.at("wall_s").get<double>()};
}

LossFn relative_lp_loss(double p) {
  return [p](const Tensor& pred, const Tensor& target, const Tensor&) { return lp_relative(pred, target, p); };
}

LossFn relative_l1_loss() { return relative_lp_loss(1.0); }

LossFn poisson_informed_loss(double p_data, double alpha, double p_phys, double h) {
  return [=](const Tensor& pred, const Tensor& target, const Tensor& input) {
    return combined_loss(lp_relative(pred, target, p_data), poisson_residual_fd(pred, input, alpha, p_phys, h));
  };
}

EvalResult evaluate(Model& model, const DatasetCollection& data, Split split, const LossFn& metric,
                    std::size_t batch_size) {
  NoGradGuard guard;
  EvalResult r;
  for (const auto& batch : make_batches(data, split, batch_size, nullptr)) {
    const auto& ds = *data.sources[batch.source];
    Tensor x = ds.input_batch(batch.indices);
    Tensor y = ds.output_batch(batch.indices);
    auto lv = metric(model.forward(x), y, x);
    r.per_sample.insert(r.per_sample.end(), lv.per_sample.begin(), lv.per_sample.end());
  }
  double s = 0.0;
  for (double v : r.per_sample) s += v;
  r.mean = r.per_sample.empty() ? 0.0 : s / static_cast<double>(r.per_sample.size());
  return r;
}

namespace {

json checkpoint_extra(const Model& model, std::size_t epoch, double val) {
  json extra = {{"epoch", epoch}, {"val_loss", val}};
  if (auto* nm = dynamic_cast<const NormalizedModel*>(&model)) extra["normalization"] = nm->normalization().to_json();
  return extra;
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x7eu};
  return std::mt19937_64(seq);
}

}  // namespace

TrainResult train_model(std::shared_ptr<Model> model, const DatasetCollection& data, const TrainConfig& cfg,
                        const LossFn& loss, const TrainOptions& opts) {
  cfg.validate();
  if (data.sources.empty()) throw ContractError("train_model needs at least one dataset");
  LossFn metric = opts.metric ? opts.metric : relative_l1_loss();
  bool write = !opts.out_dir.empty();
  std::ofstream metrics;
  if (write) {
    fs::create_directories(opts.out_dir);
    metrics.open(opts.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + (opts.out_dir / "metrics.jsonl").string());
  }

  TrainResult res;
  res.model = model;
  res.best_val = std::numeric_limits<double>::infinity();
  auto params = model->parameters();
  AdamState state;
  std::size_t n_train = data.split_size(Split::Train);
  auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double lr = lr_at_epoch(cfg.learning_rate, cfg.scheduler_gamma, cfg.scheduler_step, epoch);
    auto rng = epoch_rng(cfg.seed, epoch);
    double train_sum = 0.0;
    for (const auto& batch : make_batches(data, Split::Train, cfg.batch_size, &rng)) {
      const auto& ds = *data.sources[batch.source];
      Tensor x = ds.input_batch(batch.indices);
      Tensor y = ds.output_batch(batch.indices);
      for (auto& p : params) p.value.zero_grad();
      auto lv = loss(model->forward(x), y, x);
      double v = lv.value();
      if (!std::isfinite(v))
        throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch) +
                             (write ? "; best checkpoint kept in " + (opts.out_dir / "best").string() : ""));
      backward(lv.total);
      adamw_step(params, state, lr, cfg.weight_decay);
      train_sum += v;
    }
    TrainRecord rec;
    rec.epoch = epoch;
    rec.train_loss = n_train ? train_sum / static_cast<double>(n_train) : 0.0;
    rec.val_loss = evaluate(*model, data, Split::Validation, metric).mean;
    rec.lr = lr;
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.records.push_back(rec);
    if (!std::isfinite(rec.val_loss))
      throw NumericalError("validation loss became non-finite at epoch " + std::to_string(epoch));
    if (rec.val_loss < res.best_val) {
      res.best_val = rec.val_loss;
      res.best_epoch = epoch;
      if (write) save_checkpoint(*model, opts.out_dir / "best", checkpoint_extra(*model, epoch, rec.val_loss));
    }
    if (write) metrics << rec.to_json().dump() << '\n' << std::flush;
    if (opts.on_epoch && !opts.on_epoch(rec)) {
      res.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  if (write) {
    double last = res.records.empty() ? std::nan("") : res.records.back().val_loss;
    save_checkpoint(*model, opts.out_dir / "final",
                    checkpoint_extra(*model, res.records.size(), res.records.empty() ? 0.0 : last));
  }
  if (res.records.empty()) res.best_val = std::nan("");
  return res;
}

TrainResult train_fixed_model(const json& config, const ModelBuilder& model_builder,
                              const DatasetBuilder& dataset_builder, const LossFn& loss, const std::string& name,
                              TrainOptions opts) {
  auto cfg = TrainConfig::from_json(config);
  DatasetCollection data = dataset_builder(config);
  std::shared_ptr<Model> model = model_builder(config);
  if (config.value("normalize", true)) model = std::make_shared<NormalizedModel>(model, data.normalization());
  if (!opts.out_dir.empty()) opts.out_dir /= name;
  return train_model(model, data, cfg, loss, opts);
}

ModelBuilder default_model_builder(const std::string& family) {
  return [family](const json& config) -> std::shared_ptr<Model> {
    std::string fam = config.value("family", family);
    std::uint64_t seed = config.value("retrain", std::uint64_t{4});
    return std::shared_ptr<Model>(build_model(fam, config, seed));
  };
}

std::shared_ptr<Model> load_trained_model(const fs::path& dir) {
  auto ck = load_checkpoint(dir);
  std::shared_ptr<Model> model(std::move(ck.model));
  if (ck.manifest.contains("normalization"))
    model = std::make_shared<NormalizedModel>(model, Normalization::from_json(ck.manifest.at("normalization")));
  return model;
}

}  // namespace opforge
