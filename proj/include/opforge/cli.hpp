#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "opforge/datasets.hpp"

namespace opforge::cli {

inline constexpr const char* kVersion = "0.1.0";

// $OPFORGE_HOME, else ./opforge-runs. Commands without --out write below it.
std::filesystem::path artifact_root();

// Written to <out>/run.json before a command does any work, then updated
// with the finish time. argv alone replays the run.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json seeds = json::object();
  std::filesystem::path artifact_dir;
  std::string tool_version = kVersion;
  std::string started_at;
  std::string finished_at;

  json to_json() const;
  void write() const;
};

struct GenDataArgs {
  GenSpec spec;
  std::filesystem::path out;
  bool force = false;
};

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path data;
  std::string arch = "fno";
  std::filesystem::path out;
  std::optional<std::size_t> epochs;
  std::string loss = "l1";  // l1, l2, h1, poisson
  double alpha = 0.01;      // physics weight for loss = poisson
  std::size_t bins = 20;
};

struct TuneArgs {
  std::filesystem::path space;
  std::filesystem::path data;
  std::string arch = "fno";
  std::filesystem::path out;
  std::size_t num_samples = 20;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 0;
  std::optional<std::uint64_t> target_params;
  std::string solve;  // modes | chan_mul
  std::size_t solve_max = 0;
  std::filesystem::path default_profile;
  bool resume = false;
  bool random_search = false;
  std::string loss = "l1";
  std::size_t halt_after = 0;
};

struct ReportArgs {
  std::filesystem::path run;
  std::filesystem::path out;  // default <run>/report
  std::size_t bins = 20;
};

// Equal-width bins on [0, max]; counts sum to values.size().
struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};
Histogram histogram(const std::vector<double>& values, std::size_t bins);

void cmd_gen_data(const GenDataArgs& a, const std::vector<std::string>& argv, std::ostream& out);
void cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out);
void cmd_tune(const TuneArgs& a, const std::vector<std::string>& argv, std::ostream& out);
void cmd_report(const ReportArgs& a, const std::vector<std::string>& argv, std::ostream& out);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace opforge::cli
