// Command-line runner for utility-learning experiments.
//
//   ufl run --config sweep.json [--seed S] [--out DIR] [--workers W]
//   ufl table --table 3 --scale desk [--seed S] [--out DIR] [--workers W] [--print-config]
//
// Exit codes: 0 success, 1 invalid usage or config, 2 some cells failed.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ufl/error.hpp"
#include "ufl/experiment.hpp"

namespace {

void print_summary(const ufl::ExperimentResult& r) {
  std::printf("%-20s %-26s %10s %10s %10s\n", "row", "column", "obtained", "reference", "delta");
  for (const auto& c : r.comparison) {
    std::printf("%-20s %-26s %10.3f", c.row.c_str(), c.column.c_str(), c.obtained);
    if (c.reference) {
      std::printf(" %10.3f %+10.3f\n", *c.reference, c.obtained - *c.reference);
    } else {
      std::printf(" %10s %10s\n", "-", "-");
    }
  }
  std::printf("outputs: %s\n", r.output_dir.string().c_str());
  if (r.failed_cells > 0) std::printf("failed cells: %zu (see manifest.json)\n", r.failed_cells);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn utility functions from pairwise preferences and reproduce the benchmark tables"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run a sweep described by a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out_dir, "Override the output directory");
  run->add_option("--workers", workers, "Concurrent cells")->check(CLI::PositiveNumber);

  int table_id = 0;
  std::string scale = "desk";
  bool print_config = false;
  CLI::App* table = app.add_subcommand("table", "Reproduce one of tables 3-7 from its preset");
  table->add_option("--table", table_id, "Table id (3-7)")->required();
  table->add_option("--scale", scale, "smoke, desk or paper")->check(CLI::IsMember({"smoke", "desk", "paper"}));
  table->add_option("--seed", seed, "Override the master seed");
  table->add_option("--out", out_dir, "Override the output directory");
  table->add_option("--workers", workers, "Concurrent cells")->check(CLI::PositiveNumber);
  table->add_flag("--print-config", print_config, "Print the preset config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  ufl::ExperimentConfig config;
  try {
    if (run->parsed()) {
      config = ufl::load_experiment_config(config_path);
    } else {
      config = ufl::table_preset(table_id, ufl::scale_from_string(scale));
    }
    if (seed) config.seed = *seed;
    if (out_dir) config.output_dir = *out_dir;
    if (workers) config.workers = *workers;
    config.validate();
  } catch (const ufl::ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 1;
  }
  if (print_config) {
    std::cout << ufl::to_json(config).dump(2) << '\n';
    return 0;
  }

  try {
    const ufl::ExperimentResult result = ufl::run_experiment(config);
    print_summary(result);
    return result.failed_cells > 0 ? 2 : 0;
  } catch (const ufl::ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
