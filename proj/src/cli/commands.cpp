#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "opforge/cli.hpp"
#include "opforge/error.hpp"
#include "opforge/hpo/profiles.hpp"
#include "opforge/hpo/sweep.hpp"
#include "opforge/trainer.hpp"

namespace opforge::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

fs::path default_out(const std::string& command) {
  std::string stamp = utc_now();
  std::replace(stamp.begin(), stamp.end(), ':', '-');
  return artifact_root() / (command + "-" + stamp);
}

json read_json(const fs::path& file, const std::string& what) {
  std::ifstream in(file);
  if (!in) throw NotFoundError("cannot open " + what + " " + file.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " " + file.string() + " is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + file.string());
}

// Fills the keys a model needs from the dataset it will see.
json complete_model_config(const std::string& arch, json cfg, const OperatorDataset& ds) {
  auto fill = [&](const char* key, std::size_t v) {
    if (!cfg.contains(key)) {
      cfg[key] = v;
    } else if (cfg.at(key) != json(v)) {
      throw ConfigError(std::string("config '") + key + "' = " + cfg.at(key).dump() + " but the dataset has " +
                        std::to_string(v));
    }
  };
  fill("problem_dim", ds.dims());
  fill("in_dim", ds.in_channels);
  fill("out_dim", ds.out_channels);
  if (arch == "fno") {
    if (!cfg.contains("resolution")) cfg["resolution"] = ds.resolution();
  } else if (arch == "cno") {
    if (!cfg.contains("in_size")) cfg["in_size"] = ds.resolution();
  } else {
    throw ConfigError("unknown architecture '" + arch + "' (expected fno or cno)");
  }
  cfg["family"] = arch;
  return cfg;
}

LossFn make_loss(const std::string& name, double alpha, std::size_t resolution) {
  double h = 1.0 / static_cast<double>(resolution);
  if (name == "l1") return relative_l1_loss();
  if (name == "l2") return relative_lp_loss(2.0);
  if (name == "h1")
    return [h](const Tensor& p, const Tensor& t, const Tensor&) { return h1_relative(p, t, h); };
  if (name == "poisson") return poisson_informed_loss(1.0, alpha, 2.0, h);
  throw ConfigError("unknown loss '" + name + "' (expected l1, l2, h1 or poisson)");
}

double stddev(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

json histogram_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

void prepare_out(const fs::path& out, bool allow_existing) {
  if (fs::exists(out) && !fs::is_empty(out) && !allow_existing)
    throw ConfigError(out.string() + " already exists; pass --force or choose another directory");
  fs::create_directories(out);
}

}  // namespace

fs::path artifact_root() {
  if (const char* env = std::getenv("OPFORGE_HOME"); env && *env) return env;
  return fs::current_path() / "opforge-runs";
}

json RunManifest::to_json() const {
  return {{"command", command},           {"argv", argv},
          {"config", config},             {"seeds", seeds},
          {"artifact_dir", artifact_dir.string()}, {"tool_version", tool_version},
          {"started_at", started_at},     {"finished_at", finished_at.empty() ? json(nullptr) : json(finished_at)}};
}

void RunManifest::write() const { write_json(artifact_dir / "run.json", to_json()); }

Histogram histogram(const std::vector<double>& values, std::size_t bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  Histogram h;
  double hi = 0.0;
  for (double v : values)
    if (std::isfinite(v)) hi = std::max(hi, v);
  if (hi <= 0.0) hi = 1.0;
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(hi * static_cast<double>(i) / static_cast<double>(bins));
  h.counts.assign(bins, 0);
  for (double v : values) {
    std::size_t b = bins - 1;
    if (std::isfinite(v) && v < hi) b = std::min(bins - 1, static_cast<std::size_t>(v / hi * static_cast<double>(bins)));
    ++h.counts[b];
  }
  return h;
}

void cmd_gen_data(const GenDataArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  fs::path dir = a.out.empty() ? default_out("gen-data") : a.out;
  if (fs::exists(dir) && !a.force) throw ConfigError(dir.string() + " already exists; pass --force to overwrite");
  if (fs::exists(dir)) fs::remove_all(dir);
  fs::create_directories(dir);
  RunManifest m{"gen-data", argv, a.spec.to_json(), {{"seed", a.spec.seed}}, dir, kVersion, utc_now(), {}};
  m.write();
  OperatorDataset ds = generate_dataset(a.spec);
  save_dataset(ds, dir);
  m.finished_at = utc_now();
  m.write();
  out << "wrote " << ds.count() << " samples (" << ds.n_train << "/" << ds.n_val << "/" << ds.n_test
      << ") to " << dir.string() << "\n";
  out << "provenance " << ds.provenance.dump() << "\n";
}

void cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  hpo::Profile profile = hpo::load_profile(a.config);
  json cfg = profile.merged();
  if (a.epochs) cfg["epochs"] = *a.epochs;
  auto ds = std::make_shared<const OperatorDataset>(load_dataset(a.data));
  cfg = complete_model_config(a.arch, cfg, *ds);
  TrainConfig::from_json(cfg);
  // builds once here so config problems surface before any output is written
  build_model(a.arch, cfg, cfg.value("retrain", std::uint64_t{4}));
  LossFn loss = make_loss(a.loss, a.alpha, ds->resolution());

  fs::path dir = a.out.empty() ? default_out("train") : a.out;
  prepare_out(dir, false);
  RunManifest m{"train", argv, cfg, {{"retrain", cfg.value("retrain", std::uint64_t{4})}}, dir, kVersion, utc_now(), {}};
  m.config["loss"] = a.loss;
  m.config["data"] = fs::absolute(a.data).string();
  m.write();

  DatasetCollection data = concat_datasets({ds});
  TrainOptions opts;
  opts.out_dir = dir;
  auto res = train_fixed_model(cfg, default_model_builder(a.arch), [&](const json&) { return data; }, loss, "model",
                               opts);
  auto ev = evaluate(*res.model, data, Split::Test, relative_l1_loss());
  Histogram h = histogram(ev.per_sample, a.bins);
  json summary = {{"split", "test"},
                  {"metric", "relative_l1"},
                  {"mean", ev.mean},
                  {"std", stddev(ev.per_sample, ev.mean)},
                  {"count", ev.per_sample.size()},
                  {"epochs", res.records.size()},
                  {"best_val", res.best_val},
                  {"best_epoch", res.best_epoch},
                  {"per_sample", ev.per_sample},
                  {"histogram", histogram_json(h)}};
  write_json(dir / "eval.json", summary);
  m.finished_at = utc_now();
  m.write();
  out << "trained " << res.records.size() << " epochs; test relative L1 mean " << ev.mean << " std "
      << summary["std"].get<double>() << "\n";
  out << "histogram";
  for (auto c : h.counts) out << ' ' << c;
  out << "\n";
}

void cmd_tune(const TuneArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  hpo::SearchSpace space = hpo::SearchSpace::load(a.space.string());
  auto ds = std::make_shared<const OperatorDataset>(load_dataset(a.data));
  DatasetCollection data = concat_datasets({ds});

  hpo::SweepOptions o;
  o.num_samples = a.num_samples;
  o.workers = a.workers;
  o.seed = a.seed;
  o.max_epochs = a.max_epochs;
  o.use_tpe = !a.random_search;
  o.resume = a.resume;
  o.halt_after = a.halt_after;
  o.base_config = complete_model_config(a.arch, json::object(), *ds);
  if (a.target_params || !a.solve.empty()) {
    if (!a.target_params || a.solve.empty()) throw ConfigError("--target-params and --solve go together");
    std::string key = a.solve == "modes" ? "modes" : a.solve == "chan_mul" ? "channel_multiplier" : "";
    if (key.empty()) throw ConfigError("--solve takes modes or chan_mul");
    if (space.contains(key))
      throw ConfigError("budget mode solves '" + key + "'; remove it from the search space");
    o.budget = hpo::BudgetMode{a.arch, key, *a.target_params, a.solve_max};
  }
  if (!a.default_profile.empty()) {
    json d = hpo::load_profile(a.default_profile).merged();
    o.default_configs.push_back(complete_model_config(a.arch, d, *ds));
  }

  fs::path dir = a.out.empty() ? default_out("tune") : a.out;
  if (!a.resume) prepare_out(dir, false);
  fs::create_directories(dir);
  RunManifest m{"tune",  argv,     {{"space", space.to_json()}, {"base_config", o.base_config}},
                {{"sweep", a.seed}}, dir, kVersion, utc_now(), {}};
  m.config["default_configs"] = o.default_configs;
  m.config["data"] = fs::absolute(a.data).string();
  m.write();
  o.out_dir = dir;

  LossFn loss = make_loss(a.loss, 0.01, ds->resolution());
  auto res = hpo::tune_hyperparameters(space, default_model_builder(a.arch), [&](const json&) { return data; }, loss,
                                       o);
  m.finished_at = utc_now();
  m.write();
  std::size_t stopped = 0, failed = 0;
  for (const auto& t : res.trials) {
    stopped += t.status == hpo::TrialStatus::Stopped;
    failed += t.status == hpo::TrialStatus::Failed;
  }
  out << res.trials.size() << " trials (" << stopped << " stopped early, " << failed << " failed); best trial "
      << res.best.id << " val " << res.best.final_loss() << "\n";
  out << "best profile written to " << (dir / "best.json").string() << "\n";
}

void cmd_report(const ReportArgs& a, const std::vector<std::string>&, std::ostream& out) {
  if (!fs::exists(a.run)) throw NotFoundError("no run directory " + a.run.string());
  fs::path dir = a.out.empty() ? a.run / "report" : a.out;

  struct Point {
    double wall;
    std::size_t trial, epoch;
    double loss;
  };
  std::vector<Point> points;
  std::vector<std::string> trial_rows;
  if (fs::exists(a.run / "trials.jsonl")) {
    for (const auto& t : hpo::load_trials(a.run)) {
      double start = t.history.empty() ? 0.0 : t.history.front().wall_s;
      std::ostringstream row;
      row << t.id << ',' << hpo::status_name(t.status) << ',' << start << ',' << t.history.size() << ','
          << t.final_loss();
      trial_rows.push_back(row.str());
      for (const auto& p : t.history) points.push_back({p.wall_s, t.id, p.epoch, p.val_loss});
    }
  } else {
    fs::path metrics;
    for (const fs::path& cand : {a.run / "metrics.jsonl", a.run / "model" / "metrics.jsonl"})
      if (fs::exists(cand)) metrics = cand;
    if (metrics.empty())
      for (const auto& e : fs::directory_iterator(a.run))
        if (e.is_directory() && fs::exists(e.path() / "metrics.jsonl")) metrics = e.path() / "metrics.jsonl";
    if (!metrics.empty()) {
      std::ifstream in(metrics);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto r = TrainRecord::from_json(json::parse(line));
        points.push_back({r.wall_s, 0, r.epoch, r.val_loss});
      }
    }
  }
  bool has_eval = fs::exists(a.run / "eval.json");
  if (points.empty() && !has_eval) throw NotFoundError(a.run.string() + " holds no trial table or metrics");
  fs::create_directories(dir);

  std::stable_sort(points.begin(), points.end(), [](const Point& x, const Point& y) { return x.wall < y.wall; });
  {
    std::ofstream f(dir / "walltime.csv");
    f << std::setprecision(17) << "trial,epoch,wall_s,val_loss,best_so_far\n";
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
      if (std::isfinite(p.loss)) best = std::min(best, p.loss);
      f << p.trial << ',' << p.epoch << ',' << p.wall << ',' << p.loss << ',' << best << '\n';
    }
    if (!f) throw IoError("cannot write " + (dir / "walltime.csv").string());
  }
  if (!trial_rows.empty()) {
    std::ofstream f(dir / "trials.csv");
    f << std::setprecision(17) << "trial,status,start_s,epochs,final_val_loss\n";
    for (const auto& r : trial_rows) f << r << '\n';
  }
  std::size_t n_trials = trial_rows.empty() ? (points.empty() ? 0 : 1) : trial_rows.size();
  out << "wall-time table: " << points.size() << " rows over " << n_trials << " trajector"
      << (n_trials == 1 ? "y" : "ies") << "\n";
  if (has_eval) {
    json ev = read_json(a.run / "eval.json", "evaluation summary");
    std::vector<double> per = ev.at("per_sample").get<std::vector<double>>();
    Histogram h = histogram(per, a.bins);
    std::ofstream e(dir / "errors.csv");
    e << std::setprecision(17) << "sample,relative_l1\n";
    for (std::size_t i = 0; i < per.size(); ++i) e << i << ',' << per[i] << '\n';
    std::ofstream hf(dir / "histogram.csv");
    hf << std::setprecision(17) << "lo,hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) hf << h.edges[i] << ',' << h.edges[i + 1] << ',' << h.counts[i] << '\n';
    out << "error distribution: " << per.size() << " samples in " << h.counts.size() << " bins\n";
  }
  out << "tables written to " << dir.string() << "\n";
}

}  // namespace opforge::cli
