#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fedia::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Writes metrics.csv, summary.csv and manifest.json into `out_dir`.
int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
            const std::optional<std::filesystem::path>& baseline, std::ostream& log,
            std::size_t threads = 1);

/// Runs every (rho, beta) cell under `out_dir`, skipping cells whose manifest
/// records a completed run, and writes sweep.csv.
int cmd_sweep(const std::filesystem::path& config_path, const std::vector<double>& rhos,
              const std::vector<double>& betas, const std::filesystem::path& out_dir,
              std::ostream& log, std::size_t threads = 1);

/// Writes client_XXX/{nodes,edges}.csv plus partition.json.
int cmd_partition(const std::filesystem::path& nodes, const std::filesystem::path& edges,
                  const std::string& plan, std::uint64_t seed,
                  const std::filesystem::path& out_dir, std::ostream& log);

/// Default hyper-parameter grid for sweeps.
std::vector<double> default_grid();

}  // namespace fedia::cli
