// Experiment runner for federated social recommendation training.
//
//   fesog run <config> [--threads N] [--out DIR]
//   fesog sweep <config> --axis <name> --values <v1,v2,...> [--threads N] [--out DIR]

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fesog/experiment.hpp"
#include "fesog/kv.hpp"
#include "fesog/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated social recommendation simulator"};
  app.require_subcommand(1);

  std::size_t threads = fesog::default_threads();
  std::string out_dir;
  app.add_option("--threads", threads, "Worker threads for client updates and evaluation")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory (overrides output.dir)");

  std::string run_config;
  auto* run = app.add_subcommand("run", "Train one configuration (or a grid) and export results");
  run->add_option("config", run_config, "Config file")->required()->check(CLI::ExistingFile);

  std::string sweep_config;
  std::string axis;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Re-run a config across values of one hyperparameter");
  sweep->add_option("config", sweep_config, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "batch_size, p, d, eta, delta or lambda")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  // Global flags are also accepted after the subcommand.
  for (auto* sub : {run, sweep}) {
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory");
  }

  CLI11_PARSE(app, argc, argv);

  std::optional<std::filesystem::path> out;
  if (!out_dir.empty()) out = out_dir;

  if (*run) return fesog::run_command(run_config, out, threads, std::cout, std::cerr);
  return fesog::sweep_command(sweep_config, axis, fesog::split_list(values), out, threads,
                              std::cout, std::cerr);
}
