#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "memento/memento.hpp"

namespace {

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = memento::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_summary(const std::vector<memento::IterationReport>& reports) {
  std::size_t retrains = 0;
  for (const auto& r : reports) retrains += r.retrained ? 1 : 0;
  std::printf("%zu iterations, %zu retrain events\n", reports.size(), retrains);
  if (!reports.empty()) {
    const auto& last = reports.back();
    std::printf("final memory:");
    for (std::size_t c = 0; c < last.mem_class_counts.size(); ++c) std::printf(" class_%zu=%zu", c, last.mem_class_counts[c]);
    std::printf(" (noise=%zu of %zu)\n", last.mem_noise, last.mem_total);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replay-memory selection harness"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run one configuration");
  run_cmd->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);

  std::string sweep_config, param, values;
  unsigned workers = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one configuration per parameter value");
  sweep_cmd->add_option("--config", sweep_config, "Base configuration file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--param", param, "Configuration key to vary")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
  sweep_cmd->add_option("--workers", workers, "Worker threads (0: one per core)");

  std::string scenario, out_path;
  std::uint64_t seed = 0;
  std::optional<std::size_t> iterations, per_iteration;
  double noise = 0.0;
  bool stationary = false;
  auto* gen_cmd = app.add_subcommand("gen", "Write a scenario as sample records");
  gen_cmd->add_option("--scenario", scenario, "rare_patterns | incremental | gradual_drift")->required();
  gen_cmd->add_option("--out", out_path, "Output file")->required();
  gen_cmd->add_option("--seed", seed, "Random seed");
  gen_cmd->add_option("--iterations", iterations, "Number of iterations");
  gen_cmd->add_option("--samples-per-iteration", per_iteration, "Samples per iteration");
  gen_cmd->add_option("--noise", noise, "Fraction of samples replaced by noise");
  gen_cmd->add_flag("--stationary", stationary, "All classes present every iteration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto reports = memento::run(memento::load_run_config(config_path));
      print_summary(reports);
    } else if (*sweep_cmd) {
      const auto list = split_values(values);
      const auto results = memento::sweep(memento::read_config_file(sweep_config), param, list, workers);
      for (std::size_t i = 0; i < results.size(); ++i) {
        std::printf("%s=%s: ", param.c_str(), list[i].c_str());
        print_summary(results[i]);
      }
    } else if (*gen_cmd) {
      auto spec = memento::ScenarioSpec::make(memento::parse_scenario_kind(scenario), seed);
      if (iterations) spec.iterations = *iterations;
      if (per_iteration) spec.samples_per_iteration = *per_iteration;
      spec.stationary = stationary;
      spec.validate();
      memento::ScenarioStream stream(spec);
      memento::Rng noise_rng(memento::derive_seed(seed, 3));
      std::ofstream out(out_path, std::ios::binary);
      if (!out) memento::fail(memento::Errc::io_error, "cannot write " + out_path);
      std::int64_t it = 0;
      while (auto batch = stream.next()) {
        auto samples = noise > 0.0 ? memento::inject_noise(std::move(*batch), noise, spec, noise_rng) : std::move(*batch);
        memento::write_records(out, samples, it++);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
