#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "opforge/error.hpp"
#include "opforge/hpo/asha.hpp"
#include "opforge/hpo/space.hpp"
#include "opforge/hpo/tpe.hpp"
#include "opforge/trainer.hpp"

namespace opforge::hpo {

enum class TrialStatus { Pending, Running, Stopped, Completed, Failed };

std::string status_name(TrialStatus s);
TrialStatus status_from_name(const std::string& s);

struct HistoryPoint {
  std::size_t epoch = 0;
  double val_loss = 0.0;
  double wall_s = 0.0;
};

struct Trial {
  std::size_t id = 0;
  json config;
  TrialStatus status = TrialStatus::Pending;
  std::vector<HistoryPoint> history;
  std::string checkpoint;  // relative to the sweep directory, empty if none
  std::uint64_t seed = 0;
  bool is_default = false;
  std::string error;

  bool finished() const {
    return status == TrialStatus::Stopped || status == TrialStatus::Completed || status == TrialStatus::Failed;
  }
  // Last reported validation loss; +inf for failed or empty trials.
  double final_loss() const;
  json to_json() const;
  static Trial from_json(const json& j);
  // Equality of everything except wall-clock fields.
  bool same_outcome(const Trial& other) const;
};

bool operator==(const Trial& a, const Trial& b);

// Handed to the objective; report() returns false once the scheduler has
// stopped the trial.
class TrialContext {
 public:
  virtual ~TrialContext() = default;
  virtual bool report(std::size_t epoch, double val_loss) = 0;
  virtual const Trial& trial() const = 0;
  // Directory reserved for this trial's artifacts (empty when not persisting).
  virtual std::filesystem::path dir() const = 0;
};

// Trains one config. Throwing marks the trial failed.
using Objective = std::function<void(const json& config, TrialContext& ctx)>;

struct BudgetMode {
  std::string family;
  std::string solve_key;  // "modes" or "channel_multiplier"
  std::uint64_t target = 0;
  std::size_t maximum = 0;
};

struct SweepOptions {
  std::size_t num_samples = 10;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 0;  // rung schedule horizon
  bool use_tpe = true;          // false: random search
  bool use_asha = true;
  TpeParams tpe;
  AshaParams asha;
  json base_config = json::object();  // fixed keys merged under every sampled config
  std::vector<json> default_configs;  // evaluated first, as complete configs
  std::optional<BudgetMode> budget;
  std::filesystem::path out_dir;  // empty: nothing persisted
  bool resume = false;
  std::size_t halt_after = 0;  // testing hook: stop after this many trials are persisted
};

struct SweepResult {
  Trial best;
  std::vector<Trial> trials;  // sorted by id
};

// Thrown when halt_after fires; finished trials are already on disk.
struct SweepHalted : Error {
  explicit SweepHalted(const std::string& w) : Error(ErrorKind::Contract, w) {}
};

// Trials run in rounds of `workers`. Configs of a round are suggested from
// all earlier rounds, and an ASHA decision for trial i waits for every
// j < i of the same round to pass the rung or finish, so the table does not
// depend on thread timing.
SweepResult run_sweep(const SearchSpace& space, const Objective& objective, const SweepOptions& opts);

// Objective that trains with train_model and reports each epoch.
Objective training_objective(const ModelBuilder& model_builder, const DatasetBuilder& dataset_builder,
                             const LossFn& loss);

SweepResult tune_hyperparameters(const SearchSpace& space, const ModelBuilder& model_builder,
                                 const DatasetBuilder& dataset_builder, const LossFn& loss, SweepOptions opts);

std::vector<Trial> load_trials(const std::filesystem::path& sweep_dir);

}  // namespace opforge::hpo
