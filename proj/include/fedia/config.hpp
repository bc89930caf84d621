#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "fedia/graph.hpp"
#include "fedia/orchestrator.hpp"

namespace fedia {

/// Where an experiment's clients come from. Exactly one source is set.
struct DataSource {
  struct Synthetic {
    std::size_t num_domains = 2;
    std::size_t nodes_per_domain = 300;
    std::size_t feat_dim = 16;
    int num_classes = 4;
    double skew_strength = 0.0;
    std::uint64_t seed = 0;
    SyntheticOptions options;
  };
  std::optional<Synthetic> synthetic;
  std::optional<std::filesystem::path> nodes;  // with `edges`, partitioned by `plan`
  std::optional<std::filesystem::path> edges;
  std::optional<std::filesystem::path> partition_dir;  // output of `partition`
  std::string plan;            // ratio spec, e.g. "1:1@3"; empty = one client per domain
  std::uint64_t split_seed = 0;
};

/// Parsed experiment file: everything in ExperimentConfig except the clients.
struct RunConfig {
  nlohmann::json raw;
  DataSource data;
  ExperimentConfig experiment;  // clients left empty
};

/// Strict parse: unknown keys and ill-typed values raise ValidationError
/// naming the offending field. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& path);

/// Generates or loads the client graphs and returns a runnable config.
ExperimentConfig materialize(const RunConfig& config);

std::vector<Graph> load_partition_dir(const std::filesystem::path& dir, std::uint64_t split_seed);

}  // namespace fedia
