#include "opforge/hpo/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "opforge/budget.hpp"
#include "opforge/hpo/profiles.hpp"
#include "opforge/wrappers.hpp"

namespace opforge::hpo {

namespace fs = std::filesystem;

std::string status_name(TrialStatus s) {
  switch (s) {
    case TrialStatus::Pending: return "pending";
    case TrialStatus::Running: return "running";
    case TrialStatus::Stopped: return "stopped-early";
    case TrialStatus::Completed: return "completed";
    case TrialStatus::Failed: return "failed";
  }
  return "?";
}

TrialStatus status_from_name(const std::string& s) {
  for (auto st : {TrialStatus::Pending, TrialStatus::Running, TrialStatus::Stopped, TrialStatus::Completed,
                  TrialStatus::Failed})
    if (status_name(st) == s) return st;
  throw DataError("unknown trial status '" + s + "'");
}

double Trial::final_loss() const {
  if (status == TrialStatus::Failed || history.empty()) return std::numeric_limits<double>::infinity();
  double v = history.back().val_loss;
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

json Trial::to_json() const {
  json h = json::array();
  for (const auto& p : history) h.push_back({p.epoch, p.val_loss, p.wall_s});
  json j = {{"id", id},          {"config", config},         {"status", status_name(status)},
            {"history", h},      {"checkpoint", checkpoint}, {"seed", seed},
            {"default", is_default}};
  if (!error.empty()) j["error"] = error;
  return j;
}

Trial Trial::from_json(const json& j) {
  try {
    Trial t;
    t.id = j.at("id").get<std::size_t>();
    t.config = j.at("config");
    t.status = status_from_name(j.at("status").get<std::string>());
    for (const auto& p : j.at("history"))
      t.history.push_back({p.at(0).get<std::size_t>(), p.at(1).is_null() ? std::nan("") : p.at(1).get<double>(),
                           p.at(2).get<double>()});
    t.checkpoint = j.value("checkpoint", "");
    t.seed = j.value("seed", std::uint64_t{0});
    t.is_default = j.value("default", false);
    t.error = j.value("error", "");
    return t;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed trial record: ") + e.what());
  }
}

bool Trial::same_outcome(const Trial& o) const {
  if (id != o.id || config != o.config || status != o.status || checkpoint != o.checkpoint || seed != o.seed ||
      is_default != o.is_default || error != o.error || history.size() != o.history.size())
    return false;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto &a = history[i], &b = o.history[i];
    bool both_nan = std::isnan(a.val_loss) && std::isnan(b.val_loss);
    if (a.epoch != b.epoch || (!both_nan && a.val_loss != b.val_loss)) return false;
  }
  return true;
}

bool operator==(const Trial& a, const Trial& b) {
  if (!a.same_outcome(b)) return false;
  for (std::size_t i = 0; i < a.history.size(); ++i)
    if (a.history[i].wall_s != b.history[i].wall_s) return false;
  return true;
}

std::vector<Trial> load_trials(const fs::path& dir) {
  std::vector<Trial> out;
  std::ifstream in(dir / "trials.jsonl");
  if (!in) return out;
  std::map<std::size_t, Trial> by_id;
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      // a torn final line is what an interrupted write leaves behind
      if (i + 1 == lines.size()) break;
      throw DataError("corrupt trial table line " + std::to_string(i + 1) + " in " + (dir / "trials.jsonl").string());
    }
    Trial t = Trial::from_json(j);
    by_id[t.id] = std::move(t);
  }
  for (auto& [id, t] : by_id) out.push_back(std::move(t));
  return out;
}

namespace {

struct Interrupted {};

json merge(json base, const json& over) {
  for (const auto& [k, v] : over.items()) base[k] = v;
  return base;
}

json settings_json(const SearchSpace& space, const SweepOptions& o) {
  json j = {{"format", "opforge-sweep"},
            {"version", 1},
            {"space", space.to_json()},
            {"num_samples", o.num_samples},
            {"workers", o.workers},
            {"seed", o.seed},
            {"max_epochs", o.max_epochs},
            {"use_tpe", o.use_tpe},
            {"use_asha", o.use_asha},
            {"tpe", {{"gamma", o.tpe.gamma}, {"n_startup", o.tpe.n_startup}, {"n_candidates", o.tpe.n_candidates}}},
            {"asha", {{"eta", o.asha.eta}, {"grace", o.asha.grace}}},
            {"base_config", o.base_config},
            {"default_configs", o.default_configs}};
  if (o.budget)
    j["budget"] = {{"family", o.budget->family},
                   {"solve", o.budget->solve_key},
                   {"target", o.budget->target},
                   {"maximum", o.budget->maximum}};
  return j;
}

class Scheduler;

class Context final : public TrialContext {
 public:
  Context(Scheduler& s, std::size_t id) : sched_(s), id_(id) {}
  bool report(std::size_t epoch, double val_loss) override;
  const Trial& trial() const override;
  fs::path dir() const override;

  bool stopped = false;

 private:
  Scheduler& sched_;
  std::size_t id_;
};

class Scheduler {
 public:
  Scheduler(const SearchSpace& space, const Objective& obj, const SweepOptions& o) : space_(space), obj_(obj), o_(o) {}

  SweepResult run();

  bool report(Context& ctx, std::size_t id, std::size_t epoch, double loss);
  const Trial& trial(std::size_t id) const { return trials_[id]; }
  fs::path trial_dir(std::size_t id) const {
    return o_.out_dir.empty() ? fs::path{} : o_.out_dir / "trials" / std::to_string(id);
  }

 private:
  json make_config(std::size_t id, std::size_t round_start);
  void run_trial(std::size_t id);
  void persist(const Trial& t);
  void write_final();

  const SearchSpace& space_;
  const Objective& obj_;
  SweepOptions o_;
  std::vector<std::size_t> rungs_;
  std::vector<Trial> trials_;
  std::map<std::size_t, std::map<std::size_t, double>> records_;  // rung -> id -> loss
  std::size_t round_start_ = 0;
  std::size_t persisted_ = 0;
  bool halted_ = false;
  std::mutex mu_;
  std::condition_variable cv_;
  std::ofstream table_;
  std::chrono::steady_clock::time_point t0_;
};

bool Context::report(std::size_t epoch, double val_loss) { return sched_.report(*this, id_, epoch, val_loss); }
const Trial& Context::trial() const { return sched_.trial(id_); }
fs::path Context::dir() const { return sched_.trial_dir(id_); }

bool Scheduler::report(Context& ctx, std::size_t id, std::size_t epoch, double loss) {
  std::unique_lock lock(mu_);
  if (halted_) throw Interrupted{};
  Trial& t = trials_[id];
  if (!t.history.empty() && epoch <= t.history.back().epoch)
    throw ContractError("trial " + std::to_string(id) + " reported epoch " + std::to_string(epoch) + " after " +
                        std::to_string(t.history.back().epoch));
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  t.history.push_back({epoch, loss, wall});
  if (ctx.stopped) return false;
  if (!o_.use_asha || !std::binary_search(rungs_.begin(), rungs_.end(), epoch)) return true;

  auto& rung = records_[epoch];
  rung[id] = loss;
  cv_.notify_all();
  cv_.wait(lock, [&] {
    if (halted_) return true;
    for (std::size_t j = round_start_; j < id; ++j)
      if (!trials_[j].finished() && !rung.contains(j)) return false;
    return true;
  });
  if (halted_) throw Interrupted{};
  std::vector<double> others;
  for (const auto& [j, v] : rung)
    if (j < id) others.push_back(v);
  if (asha_decide(loss, others, o_.asha.eta) == AshaDecision::Stop) {
    ctx.stopped = true;
    return false;
  }
  return true;
}

json Scheduler::make_config(std::size_t id, std::size_t round_start) {
  json cfg;
  if (id < o_.default_configs.size()) {
    cfg = merge(o_.base_config, o_.default_configs[id]);
  } else {
    auto rng = stream_rng(o_.seed, id, 0x5a);
    json s;
    if (o_.use_tpe) {
      std::vector<Observation> obs;
      for (std::size_t j = 0; j < round_start; ++j) obs.push_back({trials_[j].config, trials_[j].final_loss()});
      s = tpe_suggest(space_, obs, rng, o_.tpe);
    } else {
      s = sample(space_, rng);
    }
    cfg = merge(o_.base_config, s);
  }
  if (o_.budget) cfg = solve_budget(o_.budget->family, cfg, o_.budget->solve_key, o_.budget->target, o_.budget->maximum);
  return cfg;
}

void Scheduler::persist(const Trial& t) {
  if (o_.out_dir.empty()) return;
  table_ << t.to_json().dump() << '\n' << std::flush;
  if (!table_) throw IoError("cannot append to " + (o_.out_dir / "trials.jsonl").string());
}

void Scheduler::run_trial(std::size_t id) {
  Context ctx(*this, id);
  std::string failure;
  try {
    obj_(trials_[id].config, ctx);
  } catch (const Interrupted&) {
    return;
  } catch (const std::exception& e) {
    failure = e.what();
    if (failure.empty()) failure = "unknown error";
  }
  std::lock_guard lock(mu_);
  if (halted_) return;
  Trial& t = trials_[id];
  if (!failure.empty()) {
    t.status = TrialStatus::Failed;
    t.error = failure;
  } else {
    t.status = ctx.stopped ? TrialStatus::Stopped : TrialStatus::Completed;
  }
  if (!o_.out_dir.empty() && fs::exists(trial_dir(id))) t.checkpoint = "trials/" + std::to_string(id);
  persist(t);
  ++persisted_;
  if (o_.halt_after && persisted_ >= o_.halt_after) halted_ = true;
  cv_.notify_all();
}

void Scheduler::write_final() {
  if (o_.out_dir.empty()) return;
  table_.close();
  fs::path tmp = o_.out_dir / "trials.jsonl.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& t : trials_) out << t.to_json().dump() << '\n';
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, o_.out_dir / "trials.jsonl");
}

SweepResult Scheduler::run() {
  if (o_.workers < 1) throw ConfigError("workers must be at least 1");
  if (o_.budget && space_.contains(o_.budget->solve_key))
    throw ConfigError("budget mode solves '" + o_.budget->solve_key + "', so it cannot also be in the search space");
  std::size_t n = std::max(o_.num_samples, o_.default_configs.size());
  if (n == 0) throw ConfigError("num_samples must be at least 1");
  if (o_.use_asha && o_.max_epochs == 0) {
    json probe = o_.default_configs.empty() ? o_.base_config : merge(o_.base_config, o_.default_configs.front());
    o_.max_epochs = probe.value("epochs", std::size_t{0});
    if (o_.max_epochs == 0 && space_.contains("epochs")) {
      const auto& d = space_.at("epochs");
      if (d.categorical())
        for (std::size_t i = 0; i < d.n_categories(); ++i)
          if (d.category(i).is_number_unsigned()) o_.max_epochs = std::max(o_.max_epochs, d.category(i).get<std::size_t>());
    }
    if (o_.max_epochs == 0) throw ConfigError("ASHA needs max_epochs (or an 'epochs' key in the base config)");
  }
  rungs_ = o_.use_asha ? asha_rungs(o_.max_epochs, o_.asha) : std::vector<std::size_t>{};

  trials_.resize(n);
  t0_ = std::chrono::steady_clock::now();
  if (!o_.out_dir.empty()) {
    fs::create_directories(o_.out_dir);
    json settings = settings_json(space_, o_);
    fs::path sj = o_.out_dir / "sweep.json";
    if (fs::exists(sj)) {
      if (!o_.resume) throw ConfigError(o_.out_dir.string() + " already holds a sweep; resume it or pick a new directory");
      std::ifstream in(sj);
      json old;
      try {
        old = json::parse(in);
      } catch (const json::parse_error&) {
        throw DataError("corrupt " + sj.string());
      }
      if (old != settings) throw ConfigError("resume settings differ from the sweep stored in " + o_.out_dir.string());
      for (auto& t : load_trials(o_.out_dir))
        if (t.id < n && t.finished()) trials_[t.id] = std::move(t);
    } else {
      std::ofstream out(sj);
      out << settings.dump(2) << '\n';
      if (!out) throw IoError("cannot write " + sj.string());
    }
    // rewrite the table with only the kept records before appending
    write_final();
    table_.open(o_.out_dir / "trials.jsonl", std::ios::app);
  }
  for (const auto& t : trials_)
    if (t.finished())
      for (const auto& p : t.history)
        if (std::binary_search(rungs_.begin(), rungs_.end(), p.epoch)) records_[p.epoch][t.id] = p.val_loss;

  for (std::size_t start = 0; start < n; start += o_.workers) {
    std::size_t end = std::min(n, start + o_.workers);
    std::vector<std::size_t> todo;
    for (std::size_t id = start; id < end; ++id) {
      if (trials_[id].finished()) continue;
      Trial t;
      t.id = id;
      t.is_default = id < o_.default_configs.size();
      t.seed = stream_rng(o_.seed, id, 0x7b)();
      try {
        t.config = make_config(id, start);
      } catch (const Error& e) {
        if (t.is_default) throw;
        t.status = TrialStatus::Failed;
        t.error = e.what();
        trials_[id] = t;
        persist(t);
        continue;
      }
      t.status = TrialStatus::Running;
      trials_[id] = std::move(t);
      if (!o_.out_dir.empty()) fs::remove_all(trial_dir(id));
      todo.push_back(id);
    }
    {
      std::lock_guard lock(mu_);
      round_start_ = start;
    }
    std::vector<std::thread> pool;
    for (std::size_t id : todo) pool.emplace_back([this, id] { run_trial(id); });
    for (auto& th : pool) th.join();
    if (halted_)
      throw SweepHalted("sweep halted after " + std::to_string(persisted_) + " persisted trials");
    for (std::size_t id = start; id < end; ++id) {
      const Trial& t = trials_[id];
      if (t.is_default && t.status == TrialStatus::Failed)
        throw ConfigError("default configuration " + std::to_string(id) + " failed: " + t.error);
    }
  }

  write_final();
  SweepResult res;
  res.trials = trials_;
  const Trial* best = nullptr;
  for (const auto& t : trials_) {
    if (t.status == TrialStatus::Failed) continue;
    if (!best || t.final_loss() < best->final_loss()) best = &t;
  }
  if (!best) throw NumericalError("every trial of the sweep failed");
  res.best = *best;
  if (!o_.out_dir.empty()) {
    json b = split_config(best->config).to_json();
    b["trial"] = best->id;
    b["val_loss"] = best->final_loss();
    std::ofstream out(o_.out_dir / "best.json", std::ios::trunc);
    out << b.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + (o_.out_dir / "best.json").string());
  }
  return res;
}

}  // namespace

SweepResult run_sweep(const SearchSpace& space, const Objective& objective, const SweepOptions& opts) {
  Scheduler s(space, objective, opts);
  return s.run();
}

Objective training_objective(const ModelBuilder& model_builder, const DatasetBuilder& dataset_builder,
                             const LossFn& loss) {
  return [=](const json& config, TrialContext& ctx) {
    auto cfg = TrainConfig::from_json(config);
    DatasetCollection data = dataset_builder(config);
    std::shared_ptr<Model> model = model_builder(config);
    if (config.value("normalize", true)) model = std::make_shared<NormalizedModel>(model, data.normalization());
    TrainOptions o;
    o.out_dir = ctx.dir();
    o.on_epoch = [&ctx](const TrainRecord& r) { return ctx.report(r.epoch, r.val_loss); };
    train_model(model, data, cfg, loss, o);
  };
}

SweepResult tune_hyperparameters(const SearchSpace& space, const ModelBuilder& model_builder,
                                 const DatasetBuilder& dataset_builder, const LossFn& loss, SweepOptions opts) {
  return run_sweep(space, training_objective(model_builder, dataset_builder, loss), opts);
}

}  // namespace opforge::hpo
