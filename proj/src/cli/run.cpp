#include <ostream>

#include "CLI11.hpp"
#include "opforge/cli.hpp"
#include "opforge/error.hpp"

namespace opforge::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Neural operator workbench: data generation, training, tuning and reports."};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenDataArgs g;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic operator dataset");
  gen->add_option("--problem", g.spec.problem, "poisson1d, poisson2d, darcy2d, transport1d or transport2d")
      ->check(CLI::IsMember({"poisson1d", "poisson2d", "darcy2d", "transport1d", "transport2d"}));
  gen->add_option("--resolution", g.spec.resolution, "Grid points per axis")->capture_default_str();
  gen->add_option("--train", g.spec.n_train, "Training samples")->capture_default_str();
  gen->add_option("--val", g.spec.n_val, "Validation samples")->capture_default_str();
  gen->add_option("--test", g.spec.n_test, "Test samples")->capture_default_str();
  gen->add_option("--length,-l", g.spec.length, "GRF correlation length (darcy)")->capture_default_str();
  gen->add_option("--seed", g.spec.seed, "Generator seed")->capture_default_str();
  gen->add_option("--modes", g.spec.modes, "Series terms of the sampled sources")->capture_default_str();
  gen->add_option("--decay", g.spec.decay, "Coefficient decay exponent")->capture_default_str();
  gen->add_option("--velocity", g.spec.velocity, "Transport velocity")->capture_default_str();
  gen->add_option("--time", g.spec.time, "Transport final time")->capture_default_str();
  gen->add_option("--out,-o", g.out, "Output directory");
  gen->add_flag("--force", g.force, "Overwrite an existing output directory");

  TrainArgs t;
  auto* train = app.add_subcommand("train", "Train one configuration and evaluate it on the test split");
  train->add_option("--config,-c", t.config, "Profile with training and architecture sections")->required();
  train->add_option("--data,-d", t.data, "Dataset directory")->required();
  train->add_option("--arch,-a", t.arch, "fno or cno")->check(CLI::IsMember({"fno", "cno"}))->capture_default_str();
  train->add_option("--out,-o", t.out, "Output directory");
  train->add_option("--epochs", t.epochs, "Override the configured epoch count");
  train->add_option("--loss", t.loss, "l1, l2, h1 or poisson")->capture_default_str();
  train->add_option("--alpha", t.alpha, "Physics residual weight for --loss poisson")->capture_default_str();
  train->add_option("--bins", t.bins, "Histogram bins of the final evaluation")->capture_default_str();

  TuneArgs u;
  auto* tune = app.add_subcommand("tune", "Hyperparameter sweep with TPE suggestions and ASHA stopping");
  tune->add_option("--space,-s", u.space, "Search space file")->required();
  tune->add_option("--data,-d", u.data, "Dataset directory")->required();
  tune->add_option("--arch,-a", u.arch, "fno or cno")->check(CLI::IsMember({"fno", "cno"}))->capture_default_str();
  tune->add_option("--out,-o", u.out, "Sweep directory");
  tune->add_option("--num-samples,-n", u.num_samples, "Number of trials")->capture_default_str();
  tune->add_option("--workers,-w", u.workers, "Concurrent trials")->capture_default_str();
  tune->add_option("--seed", u.seed, "Sweep seed")->capture_default_str();
  tune->add_option("--max-epochs", u.max_epochs, "ASHA horizon (default: the configured epochs)");
  tune->add_option("--target-params", u.target_params, "Parameter budget");
  tune->add_option("--solve", u.solve, "Variable fixed by the budget: modes or chan_mul");
  tune->add_option("--solve-max", u.solve_max, "Cap on the solved variable (0: none)");
  tune->add_option("--default-profile", u.default_profile, "Profile evaluated as the first trial");
  tune->add_option("--loss", u.loss, "Training loss: l1, l2, h1 or poisson")->capture_default_str();
  tune->add_flag("--resume", u.resume, "Continue the sweep stored in --out");
  tune->add_flag("--random", u.random_search, "Random search instead of TPE");
  tune->add_option("--halt-after", u.halt_after, "Stop after this many trials are stored (testing)");

  ReportArgs r;
  auto* report = app.add_subcommand("report", "Export wall-time and error-distribution tables");
  report->add_option("run", r.run, "Run directory of train or tune")->required();
  report->add_option("--out,-o", r.out, "Table directory (default <run>/report)");
  report->add_option("--bins", r.bins, "Histogram bins")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Config);
  }

  try {
    if (gen->parsed()) cmd_gen_data(g, args, out);
    if (train->parsed()) cmd_train(t, args, out);
    if (tune->parsed()) cmd_tune(u, args, out);
    if (report->parsed()) cmd_report(r, args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace opforge::cli
