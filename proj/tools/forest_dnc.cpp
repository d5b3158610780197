// forest-dnc: divide-and-conquer MCMC with random-forest recombination.
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fdnc/experiment.hpp"
#include "fdnc/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Divide-and-conquer MCMC with random-forest surrogates"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one experiment end to end");
  std::string experiment = "bimodal";
  std::size_t K = 10;
  std::uint64_t seed = 1;
  bool paper_scale = false;
  bool serial = false;
  std::string config_path;
  std::string out_dir;
  run->add_option("--experiment", experiment, "bimodal | moon | misspec | gaussian_mean")
      ->check(CLI::IsMember({"bimodal", "moon", "misspec", "gaussian_mean"}));
  run->add_option("--K", K, "Number of shards")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Master seed");
  run->add_flag("--paper-scale", paper_scale, "Use long chain budgets (500k iterations)");
  run->add_option("--config", config_path, "key = value overrides applied after the defaults")
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--serial", serial, "Disable OpenMP parallelism");

  auto* metrics = app.add_subcommand("metrics", "Recompute metrics.json from a run directory");
  std::string metrics_dir;
  metrics->add_option("--out", metrics_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      fdnc::ExperimentConfig cfg = fdnc::make_experiment(experiment, K, seed, paper_scale);
      if (!config_path.empty()) cfg = fdnc::config_from_text(fdnc::read_text(config_path), cfg);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      const auto res = fdnc::run_experiment(cfg, serial ? fdnc::Exec::serial : fdnc::Exec::parallel);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << cfg.out_dir << "\n";
    } else if (*metrics) {
      std::cout << fdnc::recompute_metrics(metrics_dir);
    }
  } catch (const fdnc::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
