#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dynrisk/cli/config.hpp"
#include "dynrisk/cli/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dynrisk: conditional risk measures, deviations and risk contributions on scenario trees"};
  app.require_subcommand(1, 1);

  dynrisk::cli::RunOptions opts;
  std::string out;
  std::uint64_t seed = 0;
  int trials = 0;

  std::vector<std::string> commands = dynrisk::cli::kTaskNames;
  commands.push_back("run");
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name, name == "run" ? "run every task listed in the config"
                                                       : "run the " + name + " task");
    sub->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "random seed (overrides seed)");
    sub->add_option("--trials", trials, "axiom-suite trials (overrides options.trials)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--timings", opts.timings, "record wall-clock timings in report.json");
  }
  CLI11_PARSE(app, argc, argv);

  auto* sub = app.get_subcommands().front();
  opts.command = sub->get_name();
  if (sub->count("--out")) opts.out = out;
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--trials")) opts.trials = trials;
  return dynrisk::cli::run(opts, std::cout);
}
