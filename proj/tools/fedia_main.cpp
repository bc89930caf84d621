// Command-line driver: run, sweep and partition.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fedia/commands.hpp"

namespace {

// FEDIA_THREADS caps the number of clients trained concurrently.
std::size_t thread_count() {
  if (const char* env = std::getenv("FEDIA_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid FEDIA_THREADS='" << env << "'\n";
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated graph learning simulator with importance-aware aggregation"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string baseline;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--baseline", baseline, "summary.csv of a baseline run for deltas")
      ->check(CLI::ExistingFile);

  std::vector<double> rhos = fedia::cli::default_grid();
  std::vector<double> betas = fedia::cli::default_grid();
  auto* sweep = app.add_subcommand("sweep", "Grid over mask ratio and momentum");
  sweep->add_option("--config", config, "Base experiment JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--rho", rhos, "Mask ratios")->delimiter(',');
  sweep->add_option("--beta", betas, "Momentum factors")->delimiter(',');
  sweep->add_option("--out", out, "Output directory")->required();

  std::string nodes;
  std::string edges;
  std::string plan;
  std::uint64_t seed = 0;
  auto* partition = app.add_subcommand("partition", "Split a multi-domain graph into clients");
  partition->add_option("--nodes", nodes, "Nodes CSV")->required()->check(CLI::ExistingFile);
  partition->add_option("--edges", edges, "Edges CSV")->required()->check(CLI::ExistingFile);
  partition->add_option("--plan", plan, "Domain ratios, e.g. 1:10:1:1:1:1@2")->required();
  partition->add_option("--seed", seed, "Partition seed");
  partition->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fedia::cli::kExitValidation;
  }

  if (run->parsed()) {
    return fedia::cli::cmd_run(config, out,
                               baseline.empty() ? std::nullopt : std::optional<std::string>(baseline),
                               std::cerr, thread_count());
  }
  if (sweep->parsed()) {
    return fedia::cli::cmd_sweep(config, rhos, betas, out, std::cerr, thread_count());
  }
  return fedia::cli::cmd_partition(nodes, edges, plan, seed, out, std::cerr);
}
